# -*- coding: utf-8 -*-
""" Residual-resampling bootstrap for de-sparsified impulse responses. """

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULTS
from .errors import DataError, HdsvarError, NumericalError, UsageError
from .interface import FrozenSet
from .model_core import SparseVarModel, TimeSeriesPanel, check_stable, companion
from .pipeline import Estimates, ImpulseInference, Target, estimate

logger = logging.getLogger(__name__)

RESAMPLING = FrozenSet({"iid", "block"})


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap options.

    Args:
        reps: Number of replicates B.
        seed: Master seed; replicate b draws from ``SeedSequence([seed, b])``.
        alpha: Nominal level of the intervals built from the replicates.
        burn_in: Leading pseudo observations discarded.
        freeze_tuning: Reuse the original λ_A, λ_B and λ_w instead of reselecting them.
        resampling: ``"iid"`` shock resampling (``"block"`` is reserved).
        n_jobs: joblib workers over replicates.
    """

    reps: int
    seed: int = 0
    alpha: float = 0.05
    burn_in: int = DEFAULTS.burn_in
    freeze_tuning: bool = False
    resampling: str = "iid"
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.reps < 1:
            err = "Bootstrap needs at least one replicate, got {}.".format(self.reps)
            raise UsageError(err)
        if not 0 < self.alpha < 1:
            raise UsageError("α must lie in (0, 1), got {}.".format(self.alpha))
        if self.burn_in < 0:
            err = "Burn-in must be non-negative, got {}.".format(self.burn_in)
            raise UsageError(err)
        if self.resampling not in RESAMPLING:
            err = "Resampling must be one of {}, got {!r}."
            raise UsageError(err.format(RESAMPLING, self.resampling))


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicates √n(Θ̂^{*(de)} − Θ̂^{(boot)}) per target.

    Attributes:
        targets: Tracked targets, one column each.
        replicates: Successful replicates × targets.
        indices: Replicate number b of each row.
        centers: Θ̂^{(boot)} per target.
        n: Sample size used for the √n scaling.
        failures: Number of skipped replicates.
    """

    targets: Tuple[Target, ...]
    replicates: np.ndarray
    indices: np.ndarray
    centers: np.ndarray
    n: int
    failures: int = 0

    @property
    def requested(self) -> int:
        return int(self.replicates.shape[0]) + self.failures

    def column(self, target: Target) -> np.ndarray:
        return self.replicates[:, self.targets.index(target)]


# ================================ Pseudo data ================================


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    matrix = np.asarray(matrix, dtype=float)
    values, vectors = np.linalg.eigh((matrix + matrix.T) / 2)
    if values.size and values.min() < 0:
        logger.warning(
            "Covariance has negative eigenvalue %.3g, clipped to zero", values.min()
        )
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def pseudo_innovations(
    pool: np.ndarray,
    sigma_w: np.ndarray,
    impact: np.ndarray,
    count: int,
    rng: np.random.Generator,
    root: Optional[np.ndarray] = None,
) -> np.ndarray:
    """ε*_t = B̂^{(re)}u*_t + w*_t.

    Args:
        pool: Estimated shocks û (rows), re-centered before drawing.
        sigma_w: Σ̂_w^{(re)}.
        impact: B̂^{(re)}.
        count: Number of draws.
        rng: Random generator.
        root: Precomputed square root of Σ̂_w^{(re)}.

    Returns:
        count×p innovations.

    Raises:
        DataError: The pool is empty.
    """

    pool = np.asarray(pool, dtype=float)
    if pool.ndim != 2 or pool.shape[0] == 0:
        raise DataError("The shock pool is empty.")

    pool = pool - pool.mean(axis=0)
    shocks = pool[rng.integers(0, pool.shape[0], size=count)]
    if root is None:
        root = psd_sqrt(sigma_w)
    noise = rng.standard_normal((count, root.shape[0])) @ root
    return shocks @ np.asarray(impact, dtype=float).T + noise


def pseudo_series(
    model: SparseVarModel, innovations: np.ndarray, burn_in: int = DEFAULTS.burn_in
) -> TimeSeriesPanel:
    """X*_t = Σ Â^{(thr)}_sX*_{t−s} + ε*_t from zero start, burn-in discarded.

    Raises:
        UnstableModelError: The thresholded model is not stable.
    """

    check_stable(companion(model))
    return model.simulate(innovations, burn_in=burn_in)


# ================================ Replicates ================================


def _replicate(
    estimates: Estimates,
    targets: Tuple[Target, ...],
    centers: np.ndarray,
    config: BootstrapConfig,
    root: np.ndarray,
    b: int,
) -> Optional[np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, b]))
    n = estimates.n
    innovations = pseudo_innovations(
        estimates.structure.shocks,
        estimates.covariances.sigma_w,
        estimates.covariances.impact,
        n + config.burn_in,
        rng,
        root=root,
    )
    try:
        panel = pseudo_series(estimates.thresholded, innovations, config.burn_in)
        tuning = estimates.tuning if config.freeze_tuning else None
        pseudo = estimate(panel, estimates.config, tuning=tuning)
        inference = ImpulseInference(pseudo)
        values = np.array([inference.theta_de(t) for t in targets])
    except (HdsvarError, np.linalg.LinAlgError) as error:
        logger.warning("Bootstrap replicate %d skipped: %s", b, error)
        return None

    if not np.all(np.isfinite(values)):
        logger.warning("Bootstrap replicate %d skipped: non-finite estimate", b)
        return None
    return np.sqrt(n) * (values - centers)


def bootstrap_irf(
    estimates: Estimates, targets: Sequence[Target], config: BootstrapConfig
) -> BootstrapDistribution:
    """Bootstrap distribution of the de-sparsified impulse responses.

    Each replicate simulates a pseudo series from (Â^{(thr)}, B̂^{(re)}, Σ̂_w^{(re)}),
    reruns the full estimation pipeline on it and records
    √n(Θ̂^{*(de)} − Θ̂^{(boot)}) for every target.

    Args:
        estimates: Estimates on the original data.
        targets: Tracked (h, j, r).
        config: Bootstrap options.

    Returns:
        The replicate set, merged by replicate index.

    Raises:
        UnstableModelError: The thresholded model is not stable.
        NumericalError: More than the allowed share of replicates failed.
        NotImplementedError: Block resampling was requested.
    """

    if config.resampling == "block":
        raise NotImplementedError("Block resampling of the shocks is not implemented.")

    targets = tuple(targets)
    check_stable(companion(estimates.thresholded))

    inference = ImpulseInference(estimates)
    centers = np.array([inference.theta_boot(t) for t in targets])
    root = psd_sqrt(estimates.covariances.sigma_w)

    # Replicates run their own lasso fits serially.
    serial = dataclasses.replace(estimates.config, n_jobs=1)
    inner = dataclasses.replace(estimates, config=serial)

    logger.info("Running %d bootstrap replicates", config.reps)
    results = Parallel(n_jobs=config.n_jobs)(
        delayed(_replicate)(inner, targets, centers, config, root, b)
        for b in range(config.reps)
    )

    kept = [(b, r) for b, r in enumerate(results) if r is not None]
    failures = config.reps - len(kept)
    budget = estimates.config.settings.failure_budget
    if failures > budget * config.reps:
        err = "Bootstrap aborted: {} of {} replicates failed (budget {:.0%})."
        raise NumericalError(err.format(failures, config.reps, budget))
    if failures:
        logger.warning("%d of %d bootstrap replicates skipped", failures, config.reps)

    if kept:
        replicates = np.vstack([r for _, r in kept])
    else:
        replicates = np.empty((0, len(targets)))
    indices = np.array([b for b, _ in kept], dtype=int)
    return BootstrapDistribution(
        targets, replicates, indices, centers, estimates.n, failures
    )


# ================================ Summaries ================================


def quantile(values, q: float) -> float:
    """Type-7 (linear interpolation) empirical quantile.

    Raises:
        DataError: No replicates.
        UsageError: q outside (0, 1).
    """

    if not 0 < q < 1:
        raise UsageError("Quantile level must lie in (0, 1), got {}.".format(q))
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise DataError("Cannot take a quantile of an empty replicate set.")
    return float(np.quantile(values, q, method="linear"))


def mallows_d2(sample_a, sample_b, grid_size: int = DEFAULTS.mallows_grid) -> float:
    """Mallows (Wasserstein-2) distance of two empirical laws on a quantile grid."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise DataError("Mallows distance needs two non-empty samples.")

    grid = (np.arange(grid_size) + 0.5) / grid_size
    qa = np.quantile(a, grid, method="linear")
    qb = np.quantile(b, grid, method="linear")
    return float(np.sqrt(np.mean((qa - qb) ** 2)))


def standardized_gap(
    dist: BootstrapDistribution, target: Target, se: float, seed: int = 0
) -> float:
    """Mallows distance from the standardized replicates to a Gaussian sample."""
    column = dist.column(target)
    if se <= 0 or column.size == 0:
        return float("nan")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    reference = rng.standard_normal(max(column.size, DEFAULTS.mallows_grid))
    gap = mallows_d2(column / se, reference)
    logger.info("Standardized bootstrap Mallows distance %.3f at %s", gap, target)
    return gap
