# -*- coding: utf-8 -*-
""" Row-wise lasso and adaptive-lasso estimation of VAR slopes with BIC tuning. """

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULTS, Settings
from .errors import DataError, UsageError
from .model_core import SparseVarModel, TimeSeriesPanel, stack_lags

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LassoProblem:
    """Minimize (1/n′)‖y − Xc‖² + λ Σ_s w_s|c_s|.

    Args:
        response: n′-vector y.
        design: n′×q matrix X.
        penalty: λ ≥ 0.
        weights: Non-negative q-vector; ones when omitted.
    """

    response: np.ndarray
    design: np.ndarray
    penalty: float
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        y = np.asarray(self.response, dtype=float)
        x = np.asarray(self.design, dtype=float)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            err = "Response of shape {} does not match design {}."
            raise DataError(err.format(y.shape, x.shape))
        if self.penalty < 0:
            err = "Penalty must be non-negative, got {}.".format(self.penalty)
            raise UsageError(err)

        q = x.shape[1]
        weights = self.weights
        weights = np.ones(q) if weights is None else np.asarray(weights, dtype=float)
        if weights.shape != (q,) or np.any(weights < 0):
            err = "Weights must be a non-negative vector of length {}.".format(q)
            raise UsageError(err)

        object.__setattr__(self, "response", y)
        object.__setattr__(self, "design", x)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Solution:
    coefficients: np.ndarray
    iterations: int
    converged: bool


@dataclass(frozen=True)
class RowFit:
    """Diagnostics of one adaptive-lasso row fit."""

    coefficients: np.ndarray
    penalty: float
    bic: float
    iterations: int
    converged: bool
    note: str = ""


@dataclass(frozen=True)
class VarFit:
    """Row-wise regularized estimate Â^{(re)} together with the per-row fits."""

    model: SparseVarModel
    rows: Tuple[RowFit, ...]

    @property
    def penalties(self) -> np.ndarray:
        return np.array([row.penalty for row in self.rows])

    @property
    def converged(self) -> bool:
        return all(row.converged for row in self.rows)


def soft_threshold(value: float, level: float) -> float:
    if value > level:
        return value - level
    if value < -level:
        return value + level
    return 0.0


# ============================== Coordinate descent ==============================


class GramLasso:
    """Coordinate descent on the Gram form G = XᵀX/n′ of a shared design.

    Args:
        design: n′×q design matrix.
        settings: Solver tolerance and sweep cap.
    """

    def __init__(self, design: np.ndarray, settings: Settings = DEFAULTS) -> None:
        self.design = np.asarray(design, dtype=float)
        self.n = self.design.shape[0]
        self.gram = self.design.T @ self.design / self.n
        self.settings = settings

    def correlations(self, response: np.ndarray) -> np.ndarray:
        """Xᵀy/n′."""
        return self.design.T @ response / self.n

    def lambda_max(
        self, response: np.ndarray, weights: Optional[np.ndarray] = None
    ) -> float:
        """Smallest λ at which the zero vector is optimal."""
        scores = np.abs(2 * self.correlations(response))
        if weights is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                unpenalized = np.where(scores > 0, np.inf, 0.0)
                scores = np.where(weights > 0, scores / weights, unpenalized)
        return float(np.max(scores, initial=0.0))

    def kkt_violation(self, xty, coefficients, penalty, weights) -> float:
        """Largest deviation from the lasso stationarity conditions."""
        grad = 2 * (xty - self.gram @ coefficients)
        level = penalty * weights
        active = coefficients != 0
        violation = np.where(
            active,
            np.abs(grad - level * np.sign(coefficients)),
            np.maximum(np.abs(grad) - level, 0.0),
        )
        return float(np.max(violation, initial=0.0))

    def solve(
        self,
        xty: np.ndarray,
        penalty: float,
        weights: np.ndarray,
        start: Optional[np.ndarray] = None,
    ) -> Solution:
        """Minimizes the weighted lasso objective for one response.

        Cyclic coordinate updates alternate between sweeps over the active set and full
        sweeps. Convergence requires a full sweep whose updates, scaled by the Gram
        diagonal, all stay below ``tol``, together with stationarity within ``tol``.

        Args:
            xty: Xᵀy/n′ for the response.
            penalty: λ.
            weights: Per-coordinate weights w_s.
            start: Warm start.

        Returns:
            The solution. ``converged`` is False when the sweep cap was hit, and the
            last iterate is returned.
        """

        tol = self.settings.lasso_tol
        max_iter = self.settings.lasso_max_iter
        gram = self.gram
        diag = np.diag(gram)
        q = gram.shape[0]

        coef = np.zeros(q) if start is None else np.array(start, dtype=float)
        free = (diag > 0) & np.isfinite(weights)
        coef[~free] = 0.0
        grad = xty - gram @ coef
        levels = penalty * weights / 2

        def sweep(indices) -> float:
            largest = 0.0
            for s in indices:
                old = coef[s]
                rho = grad[s] + diag[s] * old
                new = soft_threshold(rho, levels[s]) / diag[s]
                delta = new - old
                if delta != 0.0:
                    grad[:] -= gram[:, s] * delta
                    coef[s] = new
                    change = abs(delta) * diag[s]
                    if change > largest:
                        largest = change
            return largest

        everything = np.flatnonzero(free)
        iterations = 0
        while iterations < max_iter:
            iterations += 1
            if sweep(everything) < tol:
                if self.kkt_violation(xty, coef, penalty, weights) <= tol:
                    return Solution(coef, iterations, True)

            active = np.flatnonzero(coef)
            while iterations < max_iter and active.size:
                iterations += 1
                if sweep(active) < tol:
                    break

        logger.warning("Coordinate descent hit the sweep cap of %d", max_iter)
        return Solution(coef, iterations, False)


def coordinate_descent(
    problem: LassoProblem, settings: Settings = DEFAULTS
) -> Solution:
    """Solves a single :class:`LassoProblem`.

    Args:
        problem: The lasso problem.
        settings: Tolerance (``lasso_tol``) and sweep cap (``lasso_max_iter``).

    Returns:
        Coefficients, sweep count and convergence flag.
    """

    solver = GramLasso(problem.design, settings)
    xty = solver.correlations(problem.response)
    return solver.solve(xty, problem.penalty, problem.weights)


# ================================ Adaptive lasso ================================


def _bic(solver: GramLasso, response: np.ndarray, coefficients: np.ndarray) -> float:
    n = solver.n
    rss = float(np.sum((response - solver.design @ coefficients) ** 2))
    df = np.count_nonzero(coefficients)
    return n * np.log(max(rss / n, np.finfo(float).tiny)) + np.log(n) * df


def _adaptive_weights(first_stage: np.ndarray, n: int) -> np.ndarray:
    return 1.0 / (1.0 / np.sqrt(n) + np.abs(first_stage))


def penalty_grid(lambda_max: float, settings: Settings = DEFAULTS) -> np.ndarray:
    """Log-spaced descending grid from λ_max to ``lambda_ratio``·λ_max."""
    if lambda_max <= 0:
        return np.zeros(1)
    smallest = lambda_max * settings.lambda_ratio
    return np.geomspace(lambda_max, smallest, settings.n_lambda)


def adaptive_lasso_row(
    solver: GramLasso,
    response: np.ndarray,
    penalties: Sequence[float],
) -> RowFit:
    """Two-stage adaptive lasso for one response over a descending penalty path.

    At each λ the stage-1 plain lasso ĉ is computed, then the stage-2 lasso with weights
    1/(1/√n′ + |ĉ_s|). Both stages warm start along the path. The λ minimizing
    BIC = n′·log(RSS/n′) + log(n′)·df is kept, ties going to the larger λ.

    Args:
        solver: Gram-form solver for the shared design.
        response: The response vector.
        penalties: Descending λ values (a single value freezes the tuning).

    Returns:
        The selected fit.
    """

    n = solver.n
    xty = solver.correlations(response)
    q = solver.gram.shape[0]
    ones = np.ones(q)

    first = np.zeros(q)
    second = np.zeros(q)
    best = None
    iterations = 0
    converged = True
    for penalty in penalties:
        stage1 = solver.solve(xty, penalty, ones, start=first)
        first = stage1.coefficients
        weights = _adaptive_weights(first, n)
        stage2 = solver.solve(xty, penalty, weights, start=second)
        second = stage2.coefficients
        iterations += stage1.iterations + stage2.iterations
        converged = converged and stage1.converged and stage2.converged

        bic = _bic(solver, response, second)
        if best is None or bic < best[1]:
            best = (float(penalty), bic, second.copy())

    return RowFit(best[2], best[0], float(best[1]), iterations, converged)


def _fit_row(solver, response, grid, settings, index) -> RowFit:
    lambda_max = solver.lambda_max(response)
    if lambda_max <= 0:
        logger.warning("Row %d is degenerate (no correlation with the lags)", index)
        q = solver.gram.shape[0]
        return RowFit(np.zeros(q), 0.0, float("nan"), 0, True, "degenerate response")

    if grid is None:
        grid = penalty_grid(lambda_max, settings)

    fit = adaptive_lasso_row(solver, response, grid)
    if not fit.converged:
        logger.warning("Row %d: lasso did not converge within the sweep cap", index)
    return fit


def fit_var(
    panel: TimeSeriesPanel,
    lags: int,
    lambda_grid: Optional[Sequence[float]] = None,
    penalties: Optional[Sequence[float]] = None,
    settings: Settings = DEFAULTS,
    n_jobs: int = 1,
) -> VarFit:
    """Row-wise adaptive-lasso estimate of the VAR slopes.

    Responses and lag regressors are mean-centered before fitting.

    Args:
        panel: The data.
        lags: Lag order d.
        lambda_grid: Descending λ grid shared by all rows. When omitted each row uses
            ``n_lambda`` log-spaced values below its own λ_max.
        penalties: Per-row λ values to use without tuning (frozen tuning).
        settings: Solver and grid settings.
        n_jobs: joblib worker count for the row fits.

    Returns:
        The fitted model and per-row diagnostics.

    Raises:
        DataError: n ≤ d + 1.
        UsageError: Invalid grid, or penalties of the wrong size.
    """

    if panel.n <= lags + 1:
        err = "Need n > d + 1 observations, got n={} with d={}.".format(panel.n, lags)
        raise DataError(err)

    if lambda_grid is not None:
        lambda_grid = np.asarray(lambda_grid, dtype=float)
        ascending = np.any(np.diff(lambda_grid) > 0)
        if lambda_grid.size == 0 or ascending or np.any(lambda_grid < 0):
            raise UsageError("Penalty grid must be non-empty and descending.")

    if penalties is not None:
        penalties = np.asarray(penalties, dtype=float)
        if penalties.shape != (panel.p,):
            err = "Expected {} frozen penalties, got {}."
            raise UsageError(err.format(panel.p, penalties.shape))

    response, design = stack_lags(panel, lags)
    response = response - response.mean(axis=0)
    design = design - design.mean(axis=0)
    solver = GramLasso(design, settings)

    def row_grid(i):
        if penalties is not None:
            return penalties[i : i + 1]
        return lambda_grid

    logger.debug("Fitting %d lasso rows on %d observations", panel.p, solver.n)
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_fit_row)(solver, response[:, i], row_grid(i), settings, i)
        for i in range(panel.p)
    )

    stacked = np.vstack([row.coefficients for row in rows])
    return VarFit(SparseVarModel.from_stacked(stacked, lags), tuple(rows))
