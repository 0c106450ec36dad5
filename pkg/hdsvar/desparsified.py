# -*- coding: utf-8 -*-
""" De-sparsified MA and impulse-response estimators and their standard errors. """

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import DEFAULTS, Settings
from .errors import DataError, DegenerateProjectionError, NumericalError, UsageError
from .model_core import CompanionMatrix, GammaSolver, MaCoefficients, TimeSeriesPanel

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


# ============================== Projection vectors ==============================


@dataclass(frozen=True)
class ProjectionVector:
    """β̂_r = Γ̂⁻¹e_r / (e_rᵀΓ̂⁻¹e_r) and, given states, scores Ẑ_{t;r} = β̂_rᵀW_t."""

    index: int
    beta: np.ndarray
    scores: Optional[np.ndarray] = None


def projection_vector(
    gamma, index: int, states: Optional[np.ndarray] = None
) -> ProjectionVector:
    """Projection direction for stacked coordinate ``index``.

    Args:
        gamma: Γ̂(0) as a matrix or a :class:`GammaSolver`.
        index: Coordinate r of the stacked state.
        states: Optional state matrix (rows W_t) to score.

    Raises:
        NumericalError: e_rᵀΓ̂⁻¹e_r is not positive.
    """

    solver = gamma if isinstance(gamma, GammaSolver) else GammaSolver(gamma)
    column = solver.column(index)
    scale = column[index]
    if not scale > 0:
        err = "Γ̂(0)⁻¹ has non-positive diagonal entry at {}.".format(index)
        raise NumericalError(err)

    beta = column / scale
    scores = None if states is None else np.asarray(states) @ beta
    return ProjectionVector(index, beta, scores)


@dataclass(frozen=True)
class DesparsifiedPsi:
    """Ψ̂^{(de)}_{h;jr} for the requested (j, r) pairs, next to Ψ̂^{(re)}_{h;jr}."""

    horizon: int
    pairs: Tuple[Pair, ...]
    values: np.ndarray
    regularized: np.ndarray

    def __getitem__(self, pair: Pair) -> float:
        return float(self.values[self.pairs.index(tuple(pair))])


class Desparsifier:
    """Bias-corrects Ψ̂^{(re)}_h entries through projections of the lag states.

    The same Γ̂(0) factorization and the same Ẑ series serve every horizon and pair.

    Args:
        panel: The (demeaned) data.
        ma: Regularized MA coefficients Ψ̂^{(re)}, Ξ̂^{(re)}.
        solver: Factorized Γ̂(0).
        settings: Minimum sample and degeneracy tolerance.
    """

    def __init__(
        self,
        panel: TimeSeriesPanel,
        ma: MaCoefficients,
        solver: GammaSolver,
        settings: Settings = DEFAULTS,
    ) -> None:
        self.panel = panel
        self.ma = ma
        self.p = panel.p
        self.lags = ma.xi[0].shape[1] // self.p
        self.solver = solver
        self.settings = settings
        self.states = panel.states(self.lags)
        self._projections: Dict[int, ProjectionVector] = {}
        self._errors: Dict[int, np.ndarray] = {}

        if solver.dim != self.states.shape[1]:
            err = "Γ̂(0) has dimension {}, states have {}."
            raise DataError(err.format(solver.dim, self.states.shape[1]))

    def projection(self, index: int) -> ProjectionVector:
        if index not in self._projections:
            vector = projection_vector(self.solver, index, self.states)
            self._projections[index] = vector
        return self._projections[index]

    def usable(self, horizon: int) -> int:
        """Number of summands m = n − d + 1 − h, checking the minimum sample."""
        n = self.panel.n
        available = n - horizon - self.lags
        if available < self.settings.min_sample:
            err = "Horizon {} leaves {} usable observations, need at least {}."
            raise DataError(err.format(horizon, available, self.settings.min_sample))
        return n - self.lags + 1 - horizon

    def forecast_errors(self, horizon: int) -> np.ndarray:
        """Û_{t+h} = X_{t+h} − Ξ̂_hW_t for t = d..n−h."""
        if horizon not in self._errors:
            m = self.usable(horizon)
            future = self.panel.data[self.lags - 1 + horizon :]
            self._errors[horizon] = future - self.states[:m] @ self.ma.xi[horizon].T
        return self._errors[horizon]

    def _denominator(self, horizon: int, index: int) -> Tuple[np.ndarray, float]:
        m = self.usable(horizon)
        scores = self.projection(index).scores[:m]
        denominator = float(scores @ self.states[:m, index])
        if abs(denominator) / self.panel.n < self.settings.dn_tol:
            err = "Projection denominator for coordinate {} at h={} vanishes ({:.3g})."
            raise DegenerateProjectionError(err.format(index, horizon, denominator))
        return scores, denominator

    def correction(self, horizon: int, j: int, index: int) -> float:
        """DN_r⁻¹ Σ Ẑ_{t;r}Û_{t+h;j}."""
        if horizon < 1:
            err = "De-sparsified MA coefficients need h ≥ 1, got {}.".format(horizon)
            raise UsageError(err)
        scores, denominator = self._denominator(horizon, index)
        return float(scores @ self.forecast_errors(horizon)[:, j]) / denominator

    def entry(self, horizon: int, j: int, index: int) -> float:
        plug_in = float(self.ma.psi[horizon][j, index])
        return plug_in + self.correction(horizon, j, index)

    def local_projection(self, horizon: int, j: int, index: int) -> float:
        """Ψ̃_{h;jr} = Σ Ẑ_{t;r}X_{t+h;j} / Σ Ẑ_{t;r}W_{t;r}, without a plug-in."""
        scores, denominator = self._denominator(horizon, index)
        future = self.panel.data[self.lags - 1 + horizon :, j]
        return float(scores @ future) / denominator

    def psi(self, horizon: int, pairs: Sequence[Pair]) -> DesparsifiedPsi:
        pairs = tuple((int(j), int(r)) for j, r in pairs)
        values = np.array([self.entry(horizon, j, r) for j, r in pairs])
        regularized = np.array([self.ma.psi[horizon][j, r] for j, r in pairs])
        return DesparsifiedPsi(horizon, pairs, values, regularized)

    def psi_matrix(self, horizon: int, j: int, columns: Sequence[int]) -> np.ndarray:
        """Copy of Ψ̂^{(re)}_h whose row j is de-sparsified on ``columns``."""
        out = np.array(self.ma.psi[horizon], dtype=float)
        for r in columns:
            out[j, r] += self.correction(horizon, j, int(r))
        return out


def desparsify_psi(
    panel: TimeSeriesPanel,
    ma: MaCoefficients,
    gamma: np.ndarray,
    horizon: int,
    pairs: Sequence[Pair],
    settings: Settings = DEFAULTS,
) -> DesparsifiedPsi:
    """De-sparsified MA coefficients for the requested (j, r) pairs:

        Ψ̂^{(de)}_{h;jr} = Ψ̂^{(re)}_{h;jr} + DN_r⁻¹ Σ_t Ẑ_{t;r}Û_{t+h;j},

    with Û_{t+h} = X_{t+h} − Ξ̂_hW_t and the sum running over t = d..n−h.

    Raises:
        DataError: n − h − d is below the minimum usable sample.
        DegenerateProjectionError: |DN_r|/n falls below ``dn_tol``.
    """

    solver = gamma if isinstance(gamma, GammaSolver) else GammaSolver(gamma, settings)
    return Desparsifier(panel, ma, solver, settings).psi(horizon, pairs)


def local_projection_psi(
    panel: TimeSeriesPanel,
    ma: MaCoefficients,
    gamma: np.ndarray,
    horizon: int,
    pairs: Sequence[Pair],
    settings: Settings = DEFAULTS,
) -> np.ndarray:
    """Un-corrected projection estimates Ψ̃_{h;jr} for each pair."""
    solver = gamma if isinstance(gamma, GammaSolver) else GammaSolver(gamma, settings)
    desparsifier = Desparsifier(panel, ma, solver, settings)
    return np.array([desparsifier.local_projection(horizon, j, r) for j, r in pairs])


# ============================ MA standard errors ============================


class PsiVariance:
    """Asymptotic (co)variances of de-sparsified MA coefficients.

    The lag kernel vᵀ𝕃ᵀΓ̂⁻¹Γ̂(k)Γ̂⁻¹𝕃v is evaluated as gᵀ𝔸ᵏ𝕃v with g = Γ̂⁻¹𝕃v, using
    Γ̂(k) = 𝔸ᵏΓ̂(0).

    Args:
        ma: MA coefficients Ψ̂ plugged into the loadings.
        sigma: Innovation covariance Σ̂_ε plugged into the loadings.
        comp: Companion matrix that generated Γ̂.
        solver: Factorized Γ̂(0).
        n: Sample size.
    """

    def __init__(
        self,
        ma: MaCoefficients,
        sigma: np.ndarray,
        comp: CompanionMatrix,
        solver: GammaSolver,
        n: int,
    ) -> None:
        self.ma = ma
        self.sigma = np.asarray(sigma, dtype=float)
        self.comp = comp
        self.solver = solver
        self.n = n

    def kernel(self, v: np.ndarray, max_lag: int) -> np.ndarray:
        """c(k) = vᵀ𝕃ᵀΓ̂⁻¹Γ̂(k)Γ̂⁻¹𝕃v for k = 0..max_lag (c(−k) = c(k))."""
        lifted = np.zeros(self.comp.dim)
        lifted[: self.comp.p] = v
        g = self.solver.solve(lifted)
        out = np.empty(max_lag + 1)
        state = lifted
        for k in range(max_lag + 1):
            out[k] = g @ state
            state = self.comp.matrix @ state
        return out

    def _rows(self, j: int, horizon: int) -> np.ndarray:
        return np.vstack([self.ma.psi[t][j] for t in range(horizon)])

    def se(self, j: int, horizon: int, v: np.ndarray) -> float:
        """ŝe_Ψ(j, h, v), including the (1 − (h + d + |t₂ − t₁|)/n) weights."""
        if horizon < 1:
            raise UsageError("ŝe_Ψ needs h ≥ 1, got {}.".format(horizon))
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            return 0.0

        rows = self._rows(j, horizon)
        loadings = rows @ self.sigma @ rows.T
        c = self.kernel(v, horizon - 1)
        t = np.arange(horizon)
        gap = np.abs(t[None, :] - t[:, None])
        weight = 1.0 - (horizon + self.comp.lags + gap) / self.n
        variance = float(np.sum(weight * loadings * c[gap]))
        if variance < 0:
            logger.warning(
                "Negative ŝe_Ψ² %.3g at j=%d, h=%d clipped to 0", variance, j, horizon
            )
            return 0.0
        return float(np.sqrt(variance))

    def cov(self, j: int, v: np.ndarray, h1: int, h2: int) -> float:
        """Ĉov_Ψ(j, v, h₁, h₂), the unweighted cross-horizon double sum."""
        if h1 < 1 or h2 < 1:
            raise UsageError("Ĉov_Ψ needs h₁, h₂ ≥ 1, got {} and {}.".format(h1, h2))
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            return 0.0

        loadings = self._rows(j, h1) @ self.sigma @ self._rows(j, h2).T
        c = self.kernel(v, 2 * max(h1, h2))
        t1 = np.arange(h1)[:, None]
        t2 = np.arange(h2)[None, :]
        lag = np.abs(h2 - h1 + t2 - t1)
        return float(np.sum(loadings * c[lag]))


def se_psi(ma, sigma, comp, gamma, j, horizon, v, n) -> float:
    """ŝe_Ψ(j, h, v) for given plug-ins (see :class:`PsiVariance`)."""
    solver = gamma if isinstance(gamma, GammaSolver) else GammaSolver(gamma)
    return PsiVariance(ma, sigma, comp, solver, n).se(j, horizon, v)


def cov_psi(ma, sigma, comp, gamma, j, v, h1, h2, n) -> float:
    """Ĉov_Ψ(j, v, h₁, h₂) for given plug-ins (see :class:`PsiVariance`)."""
    solver = gamma if isinstance(gamma, GammaSolver) else GammaSolver(gamma)
    return PsiVariance(ma, sigma, comp, solver, n).cov(j, v, h1, h2)


# ========================= Duplication and Cholesky =========================


def vech_indices(k: int) -> Tuple[np.ndarray, np.ndarray]:
    """(row, column) pairs in vech order, column by column from the diagonal down."""
    rows, cols = [], []
    for c in range(k):
        for r in range(c, k):
            rows.append(r)
            cols.append(c)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def elimination_matrix(k: int) -> np.ndarray:
    """L_k with L_k vec(S) = vech(S); vec is column-major."""
    rows, cols = vech_indices(k)
    out = np.zeros((rows.size, k * k))
    out[np.arange(rows.size), cols * k + rows] = 1.0
    return out


def commutation_matrix(k: int) -> np.ndarray:
    """K_{kk} with K vec(M) = vec(Mᵀ)."""
    out = np.zeros((k * k, k * k))
    for c in range(k):
        for r in range(k):
            out[c * k + r, r * k + c] = 1.0
    return out


def vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).reshape(-1, order="F")


def vech(matrix: np.ndarray) -> np.ndarray:
    rows, cols = vech_indices(np.asarray(matrix).shape[0])
    return np.asarray(matrix)[rows, cols]


def cholesky_gradient(factor: np.ndarray, index: int) -> np.ndarray:
    """Jacobian of vech(Σ) ↦ (Pᵀ)⁻¹e_r where Σ = PPᵀ.

    Equals −(gᵀ ⊗ P⁻ᵀ) K Lᵀ (L(I + K)(P ⊗ I)Lᵀ)⁻¹ with g = (Pᵀ)⁻¹e_r.

    Args:
        factor: Lower triangular P with positive diagonal.
        index: Shock r.

    Returns:
        k×k(k+1)/2 matrix.

    Raises:
        NumericalError: The inner matrix is singular.
    """

    factor = np.asarray(factor, dtype=float)
    k = factor.shape[0]
    elim = elimination_matrix(k)
    comm = commutation_matrix(k)
    identity = np.eye(k)

    inner = elim @ (np.eye(k * k) + comm) @ np.kron(factor, identity) @ elim.T
    inverse_t = scipy.linalg.solve_triangular(factor, identity, lower=True).T
    g = inverse_t[:, index]
    left = -np.kron(g[None, :], inverse_t) @ comm @ elim.T
    try:
        return np.linalg.solve(inner.T, left.T).T
    except np.linalg.LinAlgError as error:
        raise NumericalError("Cholesky gradient inner matrix is singular.") from error


# ============================ Impact standard errors ============================


def impact_influence(
    residuals: np.ndarray,
    sigma: np.ndarray,
    raw_impact: np.ndarray,
    rotation: np.ndarray,
    gradient: np.ndarray,
    v: np.ndarray,
    index: int,
    shock_index: Sequence[int],
) -> np.ndarray:
    """Per-t influence term of vᵀB̂e_r.

    φ_t = vᵀ(ε̂_tε̂_{t;𝓘}ᵀ − Σ̂_{·𝓘})R̂e_r + vᵀB̃∇g vech(ε̂_{t;𝓘}ε̂_{t;𝓘}ᵀ − Σ̂_{𝓘𝓘}).
    """

    residuals = np.asarray(residuals, dtype=float)
    shock_index = list(shock_index)
    v = np.asarray(v, dtype=float)
    column = rotation[:, index]

    head = residuals[:, shock_index]
    first = (residuals @ v) * (head @ column) - v @ sigma[:, shock_index] @ column

    rows, cols = vech_indices(len(shock_index))
    block = sigma[np.ix_(shock_index, shock_index)]
    centered = head[:, rows] * head[:, cols] - block[rows, cols]
    loading = gradient.T @ (raw_impact.T @ v)
    return first + centered @ loading


def se_b(
    residuals: np.ndarray,
    sigma: np.ndarray,
    raw_impact: np.ndarray,
    rotation: np.ndarray,
    gradient: np.ndarray,
    v: np.ndarray,
    index: int,
    shock_index: Sequence[int],
) -> float:
    """ŝe_B(v, r) = √(mean φ_t²)."""
    phi = impact_influence(
        residuals, sigma, raw_impact, rotation, gradient, v, index, shock_index
    )
    return float(np.sqrt(np.mean(phi ** 2)))


def se_b_closed_form(residuals: np.ndarray, v: np.ndarray, index: int) -> float:
    """Impact standard error when every variable carries a shock (k_u = p, 𝓘 in order).

    Empirical standard deviation of (e_rᵀ ⊗ vᵀ)Lᵀ(L(I + K)(P ⊗ I)Lᵀ)⁻¹vech(ε̂_tε̂_tᵀ).
    """

    residuals = np.asarray(residuals, dtype=float)
    m, k = residuals.shape
    sigma = residuals.T @ residuals / m
    factor = np.linalg.cholesky(sigma)
    elim = elimination_matrix(k)
    symmetrizer = np.eye(k * k) + commutation_matrix(k)
    inner = elim @ symmetrizer @ np.kron(factor, np.eye(k)) @ elim.T

    unit = np.zeros(k)
    unit[index] = 1.0
    selector = np.kron(unit, np.asarray(v, dtype=float)) @ elim.T
    loading = np.linalg.solve(inner.T, selector)

    rows, cols = vech_indices(k)
    terms = (residuals[:, rows] * residuals[:, cols]) @ loading
    return float(np.std(terms))


class ImpactInfluence:
    """Caches Σ̂_ε and Cholesky gradients for repeated ŝe_B evaluations.

    Args:
        residuals: Centered residuals.
        structure: Identified structure with a Cholesky factor.

    Raises:
        UsageError: The structure was not identified recursively.
    """

    def __init__(self, residuals: np.ndarray, structure) -> None:
        if structure.factor is None:
            err = "Standard errors are only available for Cholesky identification."
            raise UsageError(err)

        self.residuals = np.asarray(residuals, dtype=float)
        self.sigma = self.residuals.T @ self.residuals / self.residuals.shape[0]
        self.structure = structure
        self._gradients: Dict[int, np.ndarray] = {}

    def gradient(self, index: int) -> np.ndarray:
        if index not in self._gradients:
            self._gradients[index] = cholesky_gradient(self.structure.factor, index)
        return self._gradients[index]

    def series(self, v: np.ndarray, index: int) -> np.ndarray:
        s = self.structure
        return impact_influence(
            self.residuals, self.sigma, s.raw_impact, s.rotation, self.gradient(index),
            v, index, s.shock_index,
        )

    def se(self, v: np.ndarray, index: int) -> float:
        return float(np.sqrt(np.mean(self.series(v, index) ** 2)))


# ============================ Impulse responses ============================


def desparsified_theta(
    psi_de: np.ndarray,
    psi_re: np.ndarray,
    impact: np.ndarray,
    impact_re: np.ndarray,
    j: int,
    index: int,
    horizon: int,
) -> float:
    """De-sparsified impulse response at (h, j, r):

        Θ̂^{(de)} = e_jᵀΨ̂^{(de)}B̂e_r − e_jᵀ(Ψ̂^{(de)} − Ψ̂^{(re)})(B̂ − B̂^{(re)})e_r.

    At h = 0 this is B̂_{jr}.
    """

    impact = np.asarray(impact, dtype=float)
    if horizon == 0:
        return float(impact[j, index])

    row_de = np.asarray(psi_de, dtype=float)[j]
    row_re = np.asarray(psi_re, dtype=float)[j]
    shift = impact[:, index] - np.asarray(impact_re, dtype=float)[:, index]
    return float(row_de @ impact[:, index] - (row_de - row_re) @ shift)


def se_theta(se_psi_value: float, se_b_value: float) -> float:
    """ŝe_Θ = √(ŝe_Ψ² + ŝe_B²)."""
    return float(np.hypot(se_psi_value, se_b_value))
