# -*- coding: utf-8 -*-
""" Confidence intervals, forecast error variance decompositions and their tests. """

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats
from joblib import Parallel, delayed
from statsmodels.stats.multitest import multipletests

from .bootstrap import BootstrapDistribution, quantile
from .errors import DataError, NumericalError, UsageError
from .interface import FrozenSet
from .pipeline import Estimates, ImpulseInference, Target

logger = logging.getLogger(__name__)

METHODS = FrozenSet({"boot", "gaussian"})
CENTERS = FrozenSet({"de", "re"})


@dataclass(frozen=True)
class ConfidenceInterval:
    """Interval [center − upper_offset, center − upper_offset + width].

    The width is stored as its own quantity, so intervals that only differ by their
    center have bit-identical lengths.
    """

    lower: float
    width: float
    center: float
    center_kind: str
    method: str
    level: float
    target: Optional[Target] = None

    @property
    def upper(self) -> float:
        return self.lower + self.width

    @property
    def length(self) -> float:
        return self.width

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class FevdEstimate:
    """ŵ^h_{i,j}: share of the h-step forecast error variance of i due to shock j."""

    variable: int
    shock: int
    horizon: int
    numerator: float
    denominator: float

    @property
    def value(self) -> float:
        return self.numerator / self.denominator


@dataclass(frozen=True)
class FevdTestResult:
    """Outcome of a test of H₀: w ≤ δ against w > δ (or w = 0 when δ = 0)."""

    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    variant: str
    delta: float
    scale: np.ndarray


def _check_center(center_kind: str) -> None:
    if center_kind not in CENTERS:
        err = "Center must be one of {}, got {!r}.".format(CENTERS, center_kind)
        raise UsageError(err)


# ================================ Intervals ================================


def ci_boot(
    center: float,
    replicates,
    n: int,
    alpha: float,
    center_kind: str = "de",
    target: Optional[Target] = None,
) -> ConfidenceInterval:
    """[ĉ − q*(1−α/2)/√n, ĉ − q*(α/2)/√n] from bootstrap replicates.

    Args:
        center: Θ̂^{(de)} or Θ̂^{(re)}.
        replicates: √n-scaled bootstrap deviations, or a distribution plus ``target``.
        n: Sample size.
        alpha: Level α.
        center_kind: ``"de"`` or ``"re"``.
        target: Column to use when ``replicates`` is a distribution.
    """

    _check_center(center_kind)
    if isinstance(replicates, BootstrapDistribution):
        replicates = replicates.column(target)

    root = np.sqrt(n)
    low = quantile(replicates, alpha / 2)
    high = quantile(replicates, 1 - alpha / 2)
    return ConfidenceInterval(
        lower=center - high / root,
        width=(high - low) / root,
        center=center,
        center_kind=center_kind,
        method="boot",
        level=1 - alpha,
        target=target,
    )


def ci_gaussian(
    center: float,
    se: float,
    n: int,
    alpha: float,
    center_kind: str = "re",
    target: Optional[Target] = None,
) -> ConfidenceInterval:
    """ĉ ∓ ŝe_Θ·z_{1−α/2}/√n."""
    _check_center(center_kind)
    if se < 0:
        raise UsageError("Standard error must be non-negative, got {}.".format(se))

    half = se * scipy.stats.norm.ppf(1 - alpha / 2) / np.sqrt(n)
    return ConfidenceInterval(
        lower=center - half,
        width=2 * half,
        center=center,
        center_kind=center_kind,
        method="gaussian",
        level=1 - alpha,
        target=target,
    )


# ================================== FEVD ==================================


def fevd(
    impulses: Sequence[np.ndarray],
    psi: Sequence[np.ndarray],
    sigma: np.ndarray,
    variable: int,
    shock: int,
    horizon: int,
) -> FevdEstimate:
    """ŵ^h_{i,j} = Σ_{k<h} Θ̂²_{k;ij} / Σ_{k<h} e_iᵀΨ̂_kΣ̂_εΨ̂_kᵀe_i.

    Args:
        impulses: Θ̂_0, Θ̂_1, … (p×k_u each).
        psi: Ψ̂_0, Ψ̂_1, ….
        sigma: Sample innovation covariance.
        variable: i.
        shock: j.
        horizon: h ≥ 1.

    Raises:
        UsageError: h < 1.
        NumericalError: The denominator is not positive.
    """

    if horizon < 1:
        raise UsageError("FEVD needs h ≥ 1, got {}.".format(horizon))

    numerator = float(sum(impulses[k][variable, shock] ** 2 for k in range(horizon)))
    rows = [psi[k][variable] for k in range(horizon)]
    denominator = float(sum(row @ sigma @ row for row in rows))
    if not denominator > 0:
        err = "FEVD denominator is not positive ({:.3g}).".format(denominator)
        raise NumericalError(err)
    return FevdEstimate(variable, shock, horizon, numerator, denominator)


# ================================ FEVD tests ================================


def fevd_test_zero(
    theta: np.ndarray, scale: np.ndarray, n: int, alpha: float
) -> FevdTestResult:
    """χ² test of Θ_{0;ij} = … = Θ_{h−1;ij} = 0.

    Rejects when θᵀΣ̂_T⁻¹θ > q_{χ²_h}(1−α)/n. A non positive definite Σ̂_T gets a ridge
    of 1e-10·trace/h.
    """

    theta = np.asarray(theta, dtype=float)
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    h = theta.size
    if scale.shape != (h, h):
        err = "Σ̂_T has shape {}, expected ({}, {}).".format(scale.shape, h, h)
        raise DataError(err)

    scale = (scale + scale.T) / 2
    try:
        factor = np.linalg.cholesky(scale)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * max(np.trace(scale), 1e-300) / h
        logger.warning("Σ̂_T is not positive definite; adding ridge %.3g", jitter)
        scale = scale + jitter * np.eye(h)
        try:
            factor = np.linalg.cholesky(scale)
        except np.linalg.LinAlgError as error:
            err = "Σ̂_T is not positive definite even after the ridge."
            raise NumericalError(err) from error

    solved = np.linalg.solve(factor, theta)
    statistic = float(solved @ solved)
    critical = float(scipy.stats.chi2.ppf(1 - alpha, h) / n)
    p_value = float(scipy.stats.chi2.sf(n * statistic, h))
    reject = statistic > critical
    return FevdTestResult(statistic, critical, p_value, reject, "zero", 0.0, scale)


def fevd_test_delta(
    theta: np.ndarray,
    variance: float,
    sandwich: np.ndarray,
    delta: float,
    n: int,
    alpha: float,
) -> FevdTestResult:
    """One-sided delta-method test of w ≤ δ.

    Rejects when Σθ²/V̂ar(Û) > δ + z_{1−α}σ̂_{T,δ}/√n with
    σ̂²_{T,δ} = ∇ᵀ[[Σ̂_T, κ̂], [κ̂ᵀ, f̂_{U²}(0)]]∇ and ∇ = (2θ, −Σθ²/V̂ar(Û)²).

    Args:
        theta: Θ̂^{(de)}_{k;ij} for k = 0..h−1.
        variance: V̂ar(Û_{t+h;i}).
        sandwich: The (h+1)×(h+1) middle matrix.
        delta: δ ∈ (0, 1).
        n: Sample size.
        alpha: Level α.
    """

    if not 0 < delta < 1:
        raise UsageError("δ must lie in (0, 1), got {}.".format(delta))
    if not variance > 0:
        err = "Forecast error variance is not positive ({:.3g}).".format(variance)
        raise NumericalError(err)

    theta = np.asarray(theta, dtype=float)
    sandwich = np.asarray(sandwich, dtype=float)
    if not np.all(np.isfinite(sandwich)):
        raise NumericalError("The delta-method covariance has non-finite entries.")

    share = float(theta @ theta) / variance
    gradient = np.append(2 * theta, -float(theta @ theta) / variance ** 2)
    sigma2 = float(gradient @ sandwich @ gradient)
    if sigma2 < 0:
        logger.warning("Negative delta-method variance %.3g clipped to 0", sigma2)
        sigma2 = 0.0
    sigma = np.sqrt(sigma2)

    z = scipy.stats.norm.ppf(1 - alpha)
    critical = delta + z * sigma / np.sqrt(n)
    if sigma > 0:
        p_value = float(scipy.stats.norm.sf(np.sqrt(n) * (share - delta) / sigma))
    else:
        p_value = 0.0 if share > delta else 1.0
    return FevdTestResult(
        statistic=share,
        critical_value=float(critical),
        p_value=p_value,
        reject=share > critical,
        variant="delta",
        delta=float(delta),
        scale=np.array(sigma),
    )


class FevdInference:
    """Assembles the FEVD test inputs from estimates.

    Args:
        estimates: Pipeline estimates.
        inference: Step-5 object sharing the projections (built when omitted).
    """

    def __init__(
        self, estimates: Estimates, inference: Optional[ImpulseInference] = None
    ) -> None:
        self.estimates = estimates
        self.inference = inference or ImpulseInference(estimates)

    def estimate(self, variable: int, shock: int, horizon: int) -> FevdEstimate:
        e = self.estimates
        return fevd(e.irf.regularized, e.ma.psi, e.sigma_eps, variable, shock, horizon)

    def theta(self, variable: int, shock: int, horizon: int) -> np.ndarray:
        return np.array(
            [
                self.inference.theta_de(Target(k, variable, shock))
                for k in range(horizon)
            ]
        )

    def _influence(self, variable: int, shock: int, horizon: int) -> np.ndarray:
        psi = self.estimates.ma.psi
        return np.vstack(
            [
                self.inference.influence.series(psi[k][variable], shock)
                for k in range(horizon)
            ]
        )

    def scale(self, variable: int, shock: int, horizon: int) -> np.ndarray:
        """Σ̂_T: Ĉov_Ψ(i, B̂^{(re)}e_j, h₁, h₂) plus cross moments of the ŝe_B terms."""
        v = self.estimates.covariances.impact[:, shock]
        phi = self._influence(variable, shock, horizon)
        out = phi @ phi.T / phi.shape[1]
        for h1 in range(1, horizon):
            for h2 in range(h1, horizon):
                value = self.inference.variance.cov(variable, v, h1, h2)
                out[h1, h2] += value
                if h2 != h1:
                    out[h2, h1] += value
        return out

    def forecast_errors(self, variable: int, horizon: int) -> np.ndarray:
        """Centered Û_{t+h;i}."""
        errors = self.inference.desparsifier.forecast_errors(horizon)[:, variable]
        return errors - errors.mean()

    def kappa(self, variable: int, shock: int, horizon: int) -> np.ndarray:
        """κ̂(h₁) for h₁ = 0..h−1."""
        e = self.estimates
        psi = e.ma.psi
        xi = e.ma.xi
        sigma = e.sigma_eps
        lifted = np.zeros(e.solver.dim)
        lifted[: e.panel.p] = e.covariances.impact[:, shock]
        g = e.solver.solve(lifted)

        rows = np.vstack([psi[k][variable] for k in range(horizon)])
        a = (rows @ sigma) @ np.vstack([xi[k] @ g for k in range(horizon)]).T
        b = rows @ sigma @ rows.T
        k = np.arange(horizon)
        k1, k2, k3 = np.meshgrid(k, k, k, indexing="ij")
        mask = (k1 + k3 - k2 - horizon) >= 0

        eps = e.residuals
        squares = (eps @ rows.T) ** 2
        squares = squares - squares.mean(axis=0)
        phi = self._influence(variable, shock, horizon)

        out = np.empty(horizon)
        for h1 in range(horizon):
            first = float(np.sum(a[:, :, None] * b[h1][None, None, :] * mask))
            second = float(np.sum(squares.T @ phi[h1]) / eps.shape[0])
            out[h1] = first + second
        return out

    def spectral_zero(self, variable: int, horizon: int) -> float:
        """f̂_{U²}(0) = Σ_{k<h} Γ̂_{U²}(k)(1 + 1(k > 0))."""
        squares = self.forecast_errors(variable, horizon) ** 2
        squares = squares - squares.mean()
        m = squares.size
        total = 0.0
        for k in range(horizon):
            acov = float(squares[k:] @ squares[: m - k]) / m
            total += acov if k == 0 else 2 * acov
        return total

    def test(
        self, variable: int, shock: int, horizon: int, delta: float, alpha: float
    ) -> FevdTestResult:
        """δ = 0 runs the χ² test, δ ∈ (0, 1) the delta-method test.

        Raises:
            UsageError: δ outside [0, 1) or h < 1.
        """

        if not 0 <= delta < 1:
            raise UsageError("δ must lie in [0, 1), got {}.".format(delta))
        if horizon < 1:
            raise UsageError("FEVD tests need h ≥ 1, got {}.".format(horizon))

        n = self.estimates.n
        theta = self.theta(variable, shock, horizon)
        scale = self.scale(variable, shock, horizon)
        if delta == 0:
            return fevd_test_zero(theta, scale, n, alpha)

        errors = self.forecast_errors(variable, horizon)
        variance = float(errors @ errors) / errors.size
        kappa = self.kappa(variable, shock, horizon)
        sandwich = np.zeros((horizon + 1, horizon + 1))
        sandwich[:horizon, :horizon] = scale
        sandwich[:horizon, horizon] = kappa
        sandwich[horizon, :horizon] = kappa
        sandwich[horizon, horizon] = self.spectral_zero(variable, horizon)
        return fevd_test_delta(theta, variance, sandwich, delta, n, alpha)

    def test_grid(
        self,
        pairs: Sequence[Tuple[int, int]],
        horizon: int,
        delta: float = 0.0,
        alpha: float = 0.05,
        n_jobs: int = 1,
    ) -> List[FevdTestResult]:
        """Runs :meth:`test` per (i, j) pair, in the order of ``pairs``."""
        pairs = list(pairs)
        logger.debug("Testing %d FEVD pairs at h=%d, δ=%s", len(pairs), horizon, delta)
        return Parallel(n_jobs=n_jobs)(
            delayed(self.test)(i, j, horizon, delta, alpha) for i, j in pairs
        )


# ================================ Networks ================================


@dataclass(frozen=True)
class NetworkEdge:
    variable: int
    shock: int
    weight: float
    p_value: float = float("nan")


def fevd_network(
    estimates: Sequence[FevdEstimate],
    threshold: Optional[float] = None,
    p_values: Optional[Sequence[float]] = None,
    fdr: float = 0.05,
) -> List[NetworkEdge]:
    """Edges i → j of the FEVD network.

    With ``threshold`` an edge exists iff ŵ > τ. With ``p_values`` (one per estimate)
    the Benjamini–Hochberg step-up procedure at level ``fdr`` decides.

    Raises:
        UsageError: Neither or both rules given, or mismatched p-values.
    """

    if (threshold is None) == (p_values is None):
        raise UsageError("Give exactly one of a relevance threshold or p-values.")

    estimates = list(estimates)
    if threshold is not None:
        return [
            NetworkEdge(w.variable, w.shock, w.value)
            for w in estimates
            if w.value > threshold
        ]

    p_values = np.asarray(p_values, dtype=float)
    if p_values.shape != (len(estimates),):
        err = "Expected {} p-values, got {}.".format(len(estimates), p_values.shape)
        raise UsageError(err)
    if not estimates:
        return []

    reject, adjusted, _, _ = multipletests(p_values, alpha=fdr, method="fdr_bh")
    return [
        NetworkEdge(w.variable, w.shock, w.value, float(q))
        for w, keep, q in zip(estimates, reject, adjusted)
        if keep
    ]


def fevd_grid(
    estimates: Estimates, variables: Sequence[int], shocks: Sequence[int], horizon: int
) -> Dict[Tuple[int, int], FevdEstimate]:
    fevds = FevdInference(estimates)
    return {(i, j): fevds.estimate(i, j, horizon) for i in variables for j in shocks}
