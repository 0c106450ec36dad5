# -*- coding: utf-8 -*-
""" Sparse VAR models, companion form, MA coefficients and autocovariances. """

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .config import DEFAULTS
from .errors import (
    DataError,
    NotPositiveDefiniteError,
    NumericalError,
    UnstableModelError,
)

logger = logging.getLogger(__name__)


# ================================ Domain types ================================


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Observations X_1..X_n of a p-dimensional series, time-major (n×p).

    Args:
        data: Real matrix with one row per time point and one column per variable.
        columns: Optional variable names.

    Raises:
        DataError: The matrix is empty, not two-dimensional, or has non-finite entries.
    """

    data: np.ndarray
    columns: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]

        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            err = "Panel must be a non-empty n×p matrix, got shape {}."
            raise DataError(err.format(data.shape))

        if not np.all(np.isfinite(data)):
            row = int(np.argwhere(~np.isfinite(data))[0][0])
            err = "Panel has a non-finite entry at time index {}.".format(row)
            raise DataError(err)

        if self.columns is not None and len(self.columns) != data.shape[1]:
            err = "Got {} column names for {} variables."
            raise DataError(err.format(len(self.columns), data.shape[1]))

        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.columns is not None:
            object.__setattr__(self, "columns", tuple(str(c) for c in self.columns))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def demeaned(self) -> "TimeSeriesPanel":
        """Returns the panel with column means removed."""
        return TimeSeriesPanel(self.data - self.data.mean(axis=0), self.columns)

    def states(self, lags: int) -> np.ndarray:
        """Stacked lag states W_t = (X_tᵀ, …, X_{t−d+1}ᵀ)ᵀ for t = d..n.

        Args:
            lags: Lag order d.

        Returns:
            (n−d+1)×(dp) matrix whose row k is W_{d+k} (1-based time).

        Raises:
            DataError: n < d.
        """

        if self.n < lags:
            err = "Panel of length {} is shorter than lag order {}."
            raise DataError(err.format(self.n, lags))

        x = self.data
        return np.hstack([x[lags - 1 - s : self.n - s] for s in range(lags)])


@dataclass(frozen=True)
class CompanionMatrix:
    """Block-companion matrix 𝔸 (dp×dp) of a VAR(d)."""

    matrix: np.ndarray
    p: int
    lags: int

    @property
    def selector(self) -> np.ndarray:
        """𝕃 = e_1 ⊗ I_p, the dp×p matrix selecting the leading block."""
        return np.eye(self.p * self.lags, self.p)

    @property
    def dim(self) -> int:
        return self.p * self.lags


@dataclass(frozen=True)
class SparseVarModel:
    """VAR(d) slopes A_1..A_d, each p×p.

    Raises:
        DataError: The slope matrices are not all square with equal dimension.
    """

    slopes: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.slopes) < 1:
            raise DataError("A VAR model needs at least one slope matrix.")

        slopes = tuple(np.array(a, dtype=float) for a in self.slopes)
        p = slopes[0].shape[0] if slopes[0].ndim == 2 else -1
        for s, a in enumerate(slopes, start=1):
            if a.ndim != 2 or a.shape != (p, p):
                err = "Slope A_{} has shape {}, expected ({}, {})."
                raise DataError(err.format(s, a.shape, p, p))
            a.setflags(write=False)

        object.__setattr__(self, "slopes", slopes)

    @classmethod
    def zeros(cls, p: int, lags: int) -> "SparseVarModel":
        return cls(tuple(np.zeros((p, p)) for _ in range(lags)))

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, lags: int) -> "SparseVarModel":
        """Builds a model from the p×(dp) matrix (A_1, …, A_d)."""
        stacked = np.asarray(stacked, dtype=float)
        p = stacked.shape[0]
        if stacked.shape[1] != p * lags:
            err = "Stacked slopes of shape {} do not match p={} and d={}."
            raise DataError(err.format(stacked.shape, p, lags))
        return cls(tuple(stacked[:, s * p : (s + 1) * p] for s in range(lags)))

    @property
    def lags(self) -> int:
        return len(self.slopes)

    @property
    def p(self) -> int:
        return self.slopes[0].shape[0]

    @property
    def stacked(self) -> np.ndarray:
        """The p×(dp) matrix (A_1, …, A_d)."""
        return np.hstack(self.slopes)

    def companion(self) -> CompanionMatrix:
        return companion(self)

    def simulate(self, innovations: np.ndarray, burn_in: int = 0) -> TimeSeriesPanel:
        """Runs X_t = Σ A_s X_{t−s} + ε_t from zero initial values.

        Args:
            innovations: (burn_in + n)×p innovation matrix.
            burn_in: Number of leading points discarded.

        Returns:
            The simulated panel of length ``len(innovations) - burn_in``.
        """

        innovations = np.asarray(innovations, dtype=float)
        total, p = innovations.shape
        if p != self.p:
            err = "Innovations have {} columns, model has p={}.".format(p, self.p)
            raise DataError(err)
        if burn_in >= total:
            err = "Burn-in {} leaves no observations out of {}.".format(burn_in, total)
            raise DataError(err)

        d = self.lags
        x = np.zeros((total + d, p))
        stacked_t = self.stacked.T
        for t in range(total):
            # Rows d+t-1 .. t in reverse order give (X_{t-1}, ..., X_{t-d}).
            state = x[t : t + d][::-1].reshape(-1)
            x[t + d] = state @ stacked_t + innovations[t]

        return TimeSeriesPanel(x[d + burn_in :])


@dataclass(frozen=True)
class MaCoefficients:
    """Moving-average coefficients Ψ_0..Ψ_H and Ξ_h = 𝕃ᵀ𝔸ʰ."""

    psi: Tuple[np.ndarray, ...]
    xi: Tuple[np.ndarray, ...]

    @property
    def horizon(self) -> int:
        return len(self.psi) - 1


@dataclass(frozen=True)
class StackedAutocovariance:
    """Γ(h) = Cov(W_{t+h}, W_t) of the stacked state."""

    lag: int
    matrix: np.ndarray


# ================================= Operations =================================


def companion(model: SparseVarModel) -> CompanionMatrix:
    """Block-companion matrix of a VAR(d).

    Args:
        model: The VAR model.

    Returns:
        𝔸 with (A_1, …, A_d) in the first block row, identities on the sub-diagonal.
    """

    p, d = model.p, model.lags
    matrix = np.zeros((d * p, d * p))
    matrix[:p] = model.stacked
    if d > 1:
        matrix[p:, : (d - 1) * p] = np.eye((d - 1) * p)

    return CompanionMatrix(matrix, p, d)


def spectral_radius(comp: CompanionMatrix) -> float:
    """Largest absolute eigenvalue of the companion matrix.

    Note:
        Uses a full eigendecomposition (LAPACK ``geev``), accurate far below the
        documented 1e-8 tolerance for the sizes handled here.
    """

    matrix = comp.matrix if isinstance(comp, CompanionMatrix) else np.asarray(comp)
    if matrix.size == 0:
        return 0.0

    try:
        eigenvalues = scipy.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as error:
        raise NumericalError("Eigenvalue computation did not converge.") from error

    return float(np.max(np.abs(eigenvalues)))


def ma_coefficients(model: SparseVarModel, horizon: int) -> MaCoefficients:
    """MA coefficients via Ξ_h = Ξ_{h−1}𝔸, Ξ_0 = 𝕃ᵀ.

    Args:
        model: The VAR model.
        horizon: Maximum horizon H ≥ 0.

    Returns:
        Ψ_0..Ψ_H together with Ξ_0..Ξ_H.
    """

    if horizon < 0:
        raise DataError("Horizon must be non-negative, got {}.".format(horizon))

    comp = companion(model)
    p = model.p
    xi = [comp.selector.T.copy()]
    for _ in range(horizon):
        xi.append(xi[-1] @ comp.matrix)

    for m in xi:
        m.setflags(write=False)

    psi = tuple(m[:, :p] for m in xi)
    return MaCoefficients(psi, tuple(xi))


def residuals(
    model: SparseVarModel, panel: TimeSeriesPanel, center: bool = True
) -> np.ndarray:
    """Residuals ε̂_t = X_t − Σ Â_s X_{t−s} for t = d+1..n.

    Args:
        model: Fitted model.
        panel: The data.
        center: Subtract column means.

    Returns:
        (n−d)×p residual matrix.

    Raises:
        DataError: n ≤ d or the dimensions disagree.
    """

    d = model.lags
    if panel.n <= d:
        raise DataError("Need more than d={} observations, got {}.".format(d, panel.n))
    if panel.p != model.p:
        raise DataError("Panel has p={}, model has p={}.".format(panel.p, model.p))

    states = panel.states(d)[:-1]
    eps = panel.data[d:] - states @ model.stacked.T
    if center:
        eps = eps - eps.mean(axis=0)
    return eps


def stacked_autocovariance(
    comp: CompanionMatrix, sigma: np.ndarray, lag: int = 0, settings=DEFAULTS
) -> StackedAutocovariance:
    """Autocovariance of the stacked state implied by (𝔸, Σ_ε).

    Γ(0) solves Γ = 𝔸Γ𝔸ᵀ + 𝕃Σ𝕃ᵀ by series doubling; Γ(h) = 𝔸ʰΓ(0) for h > 0 and
    Γ(−h) = Γ(h)ᵀ.

    Args:
        comp: Companion matrix.
        sigma: p×p innovation covariance.
        lag: Signed lag h.
        settings: Tolerances.

    Returns:
        The autocovariance at the requested lag.

    Raises:
        UnstableModelError: The companion has spectral radius ≥ 1.
        NumericalError: Doubling did not reach the tolerance.
    """

    radius = spectral_radius(comp)
    if radius >= 1.0:
        err = "Companion spectral radius {:.6g} is not below one.".format(radius)
        raise UnstableModelError(err)

    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
        raise DataError("Innovation covariance is not symmetric.")

    sigma = (sigma + sigma.T) / 2
    selector = comp.selector
    gamma = selector @ sigma @ selector.T
    power = comp.matrix.copy()
    for step in range(settings.max_doublings):
        increment = power @ gamma @ power.T
        gamma = gamma + increment
        power = power @ power
        if np.max(np.abs(increment), initial=0.0) < settings.doubling_tol:
            logger.debug("Lyapunov doubling converged after %d steps", step + 1)
            break
    else:
        err = "Lyapunov doubling did not converge in {} steps."
        raise NumericalError(err.format(settings.max_doublings))

    gamma = (gamma + gamma.T) / 2
    if lag == 0:
        return StackedAutocovariance(0, gamma)

    forward = np.linalg.matrix_power(comp.matrix, abs(lag)) @ gamma
    if lag > 0:
        return StackedAutocovariance(lag, forward)
    return StackedAutocovariance(lag, forward.T)


class GammaSolver:
    """Solves Γ(0)x = b through one shared Cholesky factorization.

    Args:
        gamma: Positive definite Γ(0).
        settings: ``dense_inverse_max`` decides whether a full inverse is kept.

    Raises:
        NotPositiveDefiniteError: Γ(0) is not positive definite.
    """

    def __init__(self, gamma: np.ndarray, settings=DEFAULTS) -> None:
        self.gamma = np.asarray(gamma, dtype=float)
        try:
            self._factor = scipy.linalg.cho_factor(self.gamma, lower=True)
        except np.linalg.LinAlgError as error:
            err = "Stacked autocovariance Γ(0) is not positive definite."
            raise NotPositiveDefiniteError(err) from error

        self._inverse = None
        if self.gamma.shape[0] <= settings.dense_inverse_max:
            identity = np.eye(self.gamma.shape[0])
            self._inverse = scipy.linalg.cho_solve(self._factor, identity)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._inverse is not None:
            return self._inverse @ rhs
        return scipy.linalg.cho_solve(self._factor, rhs)

    def column(self, index: int) -> np.ndarray:
        """Γ(0)⁻¹e_r."""
        if self._inverse is not None:
            return self._inverse[:, index].copy()
        unit = np.zeros(self.dim)
        unit[index] = 1.0
        return scipy.linalg.cho_solve(self._factor, unit)


def gamma_inverse_column(gamma: np.ndarray, index: int) -> np.ndarray:
    """Solves Γ(0)x = e_r with a symmetric positive definite solve.

    Raises:
        NotPositiveDefiniteError: Γ(0) is singular or indefinite.
    """
    return GammaSolver(gamma, DEFAULTS.replace(dense_inverse_max=0)).column(index)


def check_stable(
    comp: CompanionMatrix, margin: float = DEFAULTS.stability_margin
) -> float:
    """Returns the spectral radius, raising if it is not below ``1 - margin``."""
    radius = spectral_radius(comp)
    if radius >= 1.0 - margin:
        err = "Companion spectral radius {:.6g} ≥ 1 − {:g}.".format(radius, margin)
        raise UnstableModelError(err)
    return radius


def stack_lags(panel: TimeSeriesPanel, lags: int) -> Tuple[np.ndarray, np.ndarray]:
    """Regression pair (Y, W) with Y_t = X_t regressed on W_{t−1} for t = d+1..n."""
    states = panel.states(lags)
    return panel.data[lags:], states[:-1]


def broadcast_indices(values: Sequence[int], p: int, name: str) -> Tuple[int, ...]:
    """Validates a list of 0-based variable indices."""
    values = tuple(int(v) for v in values)
    if not values:
        raise DataError("{} must not be empty.".format(name))
    if len(set(values)) != len(values):
        raise DataError("{} has duplicate entries: {}.".format(name, values))
    for v in values:
        if not 0 <= v < p:
            raise DataError("{} entry {} is outside 0..{}.".format(name, v, p - 1))
    return values
