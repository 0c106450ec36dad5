# -*- coding: utf-8 -*-
""" The estimation pipeline, from regularized fits to de-sparsified responses.

Steps:
    1. Row-wise adaptive lasso of the VAR slopes.
    2. Thresholding of the slopes.
    3. Short-run identification of the impact matrix, and covariances regularized by
       cross-validated thresholds.
    4. MA coefficients, autocovariances and regularized impulse responses.
    5. De-sparsification of the responses and their standard errors.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULTS, Settings
from .desparsified import (
    Desparsifier,
    ImpactInfluence,
    PsiVariance,
    desparsified_theta,
    se_theta,
)
from .errors import DataError, UsageError
from .model_core import (
    CompanionMatrix,
    GammaSolver,
    MaCoefficients,
    SparseVarModel,
    TimeSeriesPanel,
    companion,
    ma_coefficients,
    residuals,
    stacked_autocovariance,
)
from .sparse_regression import VarFit, fit_var
from .structural_id import (
    IdentifiedStructure,
    IrfSet,
    StructuralSpec,
    identify,
    regularized_irf,
)
from .thresholding import (
    RegularizedCovariances,
    regularize_covariances,
    threshold_slopes,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Options of one estimation run.

    Args:
        lags: VAR order d.
        shock_index: 𝓘 as 0-based variable indices, in Cholesky order.
        horizon: Maximum horizon H of the MA coefficients.
        lambda_grid: Descending λ grid shared by all lasso rows (per-row grids if None).
        settings: Numerical settings.
        n_jobs: joblib workers for the lasso rows.
    """

    lags: int
    shock_index: Tuple[int, ...]
    horizon: int = 20
    lambda_grid: Optional[Tuple[float, ...]] = None
    settings: Settings = field(default_factory=lambda: DEFAULTS)
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.lags < 1:
            raise UsageError("Lag order must be at least 1, got {}.".format(self.lags))
        if self.horizon < 0:
            err = "Horizon must be non-negative, got {}.".format(self.horizon)
            raise UsageError(err)
        object.__setattr__(self, "shock_index", tuple(int(i) for i in self.shock_index))
        if self.lambda_grid is not None:
            grid = tuple(float(v) for v in self.lambda_grid)
            object.__setattr__(self, "lambda_grid", grid)

    @property
    def spec(self) -> StructuralSpec:
        return StructuralSpec(self.shock_index)


@dataclass(frozen=True)
class Tuning:
    """Selected tuning parameters: per-row λ_A, λ_B and λ_w."""

    row_penalties: np.ndarray
    lambda_b: float
    lambda_w: float


@dataclass(frozen=True)
class Target:
    """Impulse response of variable ``variable`` to shock ``shock`` at ``horizon``.

    ``shock`` is a position in 𝓘 (0-based).
    """

    horizon: int
    variable: int
    shock: int


@dataclass(frozen=True)
class Estimates:
    """Everything Steps 1–4 produce, plus the derived objects Step 5 reuses."""

    panel: TimeSeriesPanel
    config: PipelineConfig
    model: SparseVarModel
    thresholded: SparseVarModel
    residuals: np.ndarray
    sigma_eps: np.ndarray
    structure: IdentifiedStructure
    covariances: RegularizedCovariances
    tuning: Tuning
    ma: MaCoefficients
    companion_thr: CompanionMatrix
    solver: GammaSolver
    irf: IrfSet
    fit: Optional[VarFit] = None

    @property
    def n(self) -> int:
        return self.panel.n


def assemble(
    panel: TimeSeriesPanel,
    config: PipelineConfig,
    model: SparseVarModel,
    thresholded: SparseVarModel,
    row_penalties: np.ndarray,
    lambda_b: Optional[float] = None,
    lambda_w: Optional[float] = None,
    fit: Optional[VarFit] = None,
) -> Estimates:
    """Steps 2–4 for given slope estimates.

    Args:
        panel: Demeaned data.
        config: Pipeline options.
        model: Â^{(re)}.
        thresholded: Â^{(thr)}.
        row_penalties: λ_A per row.
        lambda_b: Frozen λ_B (cross-validated when None).
        lambda_w: Frozen λ_w (cross-validated when None).
        fit: Row diagnostics, kept for reporting.

    Returns:
        The assembled estimates.
    """

    settings = config.settings
    eps = residuals(model, panel, center=True)
    sigma_eps = eps.T @ eps / eps.shape[0]

    structure = identify(eps, config.spec)
    covariances = regularize_covariances(
        eps, structure, lambda_b=lambda_b, lambda_w=lambda_w, settings=settings
    )

    ma = ma_coefficients(model, config.horizon)
    comp = companion(thresholded)
    gamma = stacked_autocovariance(comp, covariances.sigma_eps, 0, settings).matrix
    solver = GammaSolver(gamma, settings)
    irf = regularized_irf(ma, structure.impact, structure.raw_impact)

    tuning = Tuning(
        np.asarray(row_penalties, dtype=float),
        covariances.lambda_b,
        covariances.lambda_w,
    )
    return Estimates(
        panel=panel,
        config=config,
        model=model,
        thresholded=thresholded,
        residuals=eps,
        sigma_eps=sigma_eps,
        structure=structure,
        covariances=covariances,
        tuning=tuning,
        ma=ma,
        companion_thr=comp,
        solver=solver,
        irf=irf,
        fit=fit,
    )


def estimate(
    panel: TimeSeriesPanel, config: PipelineConfig, tuning: Optional[Tuning] = None
) -> Estimates:
    """Runs Steps 1–4 on a panel.

    The panel is demeaned first. With ``tuning`` every penalty is frozen at the given
    values instead of being selected by BIC and cross-validation.

    Raises:
        DataError: The panel is too short or 𝓘 does not fit it.
    """

    if panel.n <= config.lags + 1:
        err = "Need n > d + 1, got n={} and d={}.".format(panel.n, config.lags)
        raise DataError(err)
    config.spec.validate(panel.p)

    panel = panel.demeaned()
    penalties = None if tuning is None else tuning.row_penalties
    fit = fit_var(
        panel,
        config.lags,
        lambda_grid=config.lambda_grid,
        penalties=penalties,
        settings=config.settings,
        n_jobs=config.n_jobs,
    )
    thresholded = threshold_slopes(fit)
    logger.info(
        "Lasso kept %d of %d slopes (%d after thresholding)",
        np.count_nonzero(fit.model.stacked),
        fit.model.stacked.size,
        np.count_nonzero(thresholded.stacked),
    )

    return assemble(
        panel,
        config,
        fit.model,
        thresholded,
        fit.penalties,
        lambda_b=None if tuning is None else tuning.lambda_b,
        lambda_w=None if tuning is None else tuning.lambda_w,
        fit=fit,
    )


# ============================ Step 5: de-sparsification ============================


class ImpulseInference:
    """De-sparsified impulse responses and standard errors for fixed estimates.

    Args:
        estimates: Output of :func:`estimate` or :func:`assemble`.
    """

    def __init__(self, estimates: Estimates) -> None:
        self.estimates = estimates
        settings = estimates.config.settings
        self.desparsifier = Desparsifier(
            estimates.panel, estimates.ma, estimates.solver, settings
        )
        self.variance = PsiVariance(
            estimates.ma,
            estimates.covariances.sigma_eps,
            estimates.companion_thr,
            estimates.solver,
            estimates.n,
        )
        self._influence = None
        self._ma_thr = None

    @property
    def influence(self) -> ImpactInfluence:
        if self._influence is None:
            e = self.estimates
            self._influence = ImpactInfluence(e.residuals, e.structure)
        return self._influence

    @property
    def ma_thr(self) -> MaCoefficients:
        if self._ma_thr is None:
            e = self.estimates
            self._ma_thr = ma_coefficients(e.thresholded, e.config.horizon)
        return self._ma_thr

    def _check(self, target: Target) -> None:
        e = self.estimates
        if not 0 <= target.horizon <= e.config.horizon:
            err = "Horizon {} outside 0..{}.".format(target.horizon, e.config.horizon)
            raise UsageError(err)
        if not 0 <= target.variable < e.panel.p:
            err = "Variable {} outside 0..{}.".format(target.variable, e.panel.p - 1)
            raise UsageError(err)
        if not 0 <= target.shock < len(e.config.shock_index):
            err = "Shock {} outside 0..{}."
            raise UsageError(err.format(target.shock, len(e.config.shock_index) - 1))

    def theta_re(self, target: Target) -> float:
        self._check(target)
        matrix = self.estimates.irf.regularized[target.horizon]
        return float(matrix[target.variable, target.shock])

    def theta_raw(self, target: Target) -> float:
        self._check(target)
        matrix = self.estimates.irf.raw[target.horizon]
        return float(matrix[target.variable, target.shock])

    def theta_de(self, target: Target) -> float:
        self._check(target)
        e = self.estimates
        h, j, r = target.horizon, target.variable, target.shock
        impact = e.structure.impact
        impact_re = e.covariances.impact
        if h == 0:
            return desparsified_theta(None, None, impact, impact_re, j, r, 0)

        support = np.flatnonzero(impact_re[:, r])
        psi_re = e.ma.psi[h]
        psi_de = self.desparsifier.psi_matrix(h, j, support)
        return desparsified_theta(psi_de, psi_re, impact, impact_re, j, r, h)

    def theta_boot(self, target: Target) -> float:
        """Bootstrap centering e_jᵀΨ^{(thr)}_hB̂^{(re)}e_r."""
        self._check(target)
        impact_re = self.estimates.covariances.impact
        row = self.ma_thr.psi[target.horizon][target.variable]
        return float(row @ impact_re[:, target.shock])

    def se_components(self, target: Target) -> Tuple[float, float]:
        """(ŝe_Ψ(j, h, B̂^{(re)}e_r), ŝe_B(Ψ̂^{(re)ᵀ}_he_j, r))."""
        self._check(target)
        e = self.estimates
        h, j, r = target.horizon, target.variable, target.shock
        se_b_value = self.influence.se(e.ma.psi[h][j], r)
        if h == 0:
            return 0.0, se_b_value
        return self.variance.se(j, h, e.covariances.impact[:, r]), se_b_value

    def se_theta(self, target: Target) -> float:
        return se_theta(*self.se_components(target))


@dataclass(frozen=True)
class TargetTable:
    """Per-target estimates, aligned with ``targets``."""

    targets: Tuple[Target, ...]
    theta_re: np.ndarray
    theta_de: np.ndarray
    theta_boot: np.ndarray
    se: np.ndarray

    def index(self) -> Dict[Target, int]:
        return {t: k for k, t in enumerate(self.targets)}


def evaluate(
    estimates: Estimates, targets: Sequence[Target], standard_errors: bool = True
) -> TargetTable:
    """Step 5 for a list of targets."""
    inference = ImpulseInference(estimates)
    targets = tuple(targets)
    theta_re = np.array([inference.theta_re(t) for t in targets])
    theta_de = np.array([inference.theta_de(t) for t in targets])
    theta_boot = np.array([inference.theta_boot(t) for t in targets])
    if standard_errors:
        se = np.array([inference.se_theta(t) for t in targets])
    else:
        se = np.full(len(targets), np.nan)
    return TargetTable(targets, theta_re, theta_de, theta_boot, se)


def targets_for(
    horizons: Sequence[int], variables: Sequence[int], shock: int
) -> Tuple[Target, ...]:
    return tuple(Target(h, j, shock) for h in horizons for j in variables)
