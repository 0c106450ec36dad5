# -*- coding: utf-8 -*-
""" Random sparse SVAR data generating processes and their simulation. """

import dataclasses
import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.stats

from .config import DEFAULTS, Settings
from .errors import NumericalError, UsageError
from .interface import FrozenSet
from .model_core import SparseVarModel, companion, ma_coefficients, spectral_radius

logger = logging.getLogger(__name__)

LAWS = FrozenSet({"gaussian", "student_t"})

# Degrees of freedom of the Student-t innovations.
T_DF = 10


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of a random sparse SVAR.

    Args:
        p: Dimension.
        n: Default sample size for simulations.
        lags: VAR order d.
        k_a: Nonzeros per row of (A_1, …, A_d).
        radius: Target spectral radius of the companion matrix.
        n_shocks: k_u.
        shock: Shock of interest r as a 0-based position in 𝓘.
        k_b: Nonzeros per column of B.
        k_d: Nonzeros per row of Σ_w.
        shock_index: 𝓘, 0-based; the first k_u variables when omitted.
        eig_low: Lower end of the spectrum of Σ_ε.
        eig_high: Upper end of the spectrum of Σ_ε.
        law: ``"gaussian"`` or ``"student_t"`` (ten degrees of freedom, unit variance).
        name: Label used in reports.
    """

    p: int
    n: int
    lags: int
    k_a: int
    radius: float
    n_shocks: int
    shock: int
    k_b: int
    k_d: int
    shock_index: Optional[Tuple[int, ...]] = None
    eig_low: float = 0.5
    eig_high: float = 5.0
    law: str = "gaussian"
    name: str = ""

    def __post_init__(self) -> None:
        for key in ("p", "n", "lags", "k_a", "n_shocks", "k_b", "k_d"):
            if getattr(self, key) < 1:
                err = "DGP field {} must be positive, got {}."
                raise UsageError(err.format(key, getattr(self, key)))
        if not 0 < self.radius < 1:
            err = "Target radius must lie in (0, 1), got {}.".format(self.radius)
            raise UsageError(err)
        if self.n_shocks > self.p:
            raise UsageError("k_u={} exceeds p={}.".format(self.n_shocks, self.p))
        if not 0 <= self.shock < self.n_shocks:
            err = "Shock of interest {} outside 0..{}."
            raise UsageError(err.format(self.shock, self.n_shocks - 1))
        if self.law not in LAWS:
            err = "Innovation law must be one of {}, got {!r}.".format(LAWS, self.law)
            raise UsageError(err)
        if not 0 < self.eig_low <= self.eig_high:
            raise UsageError("Eigenvalue range must satisfy 0 < low ≤ high.")

        index = self.shock_index
        if index is None:
            index = tuple(range(self.n_shocks))
        index = tuple(int(i) for i in index)
        if len(index) != self.n_shocks or len(set(index)) != len(index):
            err = "Shock index set must hold {} distinct entries.".format(self.n_shocks)
            raise UsageError(err)
        if min(index) < 0 or max(index) >= self.p:
            err = "Shock index set {} outside 0..{}.".format(index, self.p - 1)
            raise UsageError(err)
        object.__setattr__(self, "shock_index", index)

    def replace(self, **changes) -> "DgpSpec":
        """Copy with fields overridden. A new k_u re-derives the shock index."""
        if "n_shocks" in changes and "shock_index" not in changes:
            changes["shock_index"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class GeneratedDgp:
    """A drawn DGP: slopes, impact B, Σ_w (zero on 𝓘) and Σ_ε = BBᵀ + Σ_w."""

    spec: DgpSpec
    seed: int
    model: SparseVarModel
    impact: np.ndarray
    sigma_w: np.ndarray

    @property
    def sigma_eps(self) -> np.ndarray:
        return self.impact @ self.impact.T + self.sigma_w

    def noise_root(self) -> np.ndarray:
        """Symmetric square root D of Σ_w, exactly zero on the rows of 𝓘."""
        p = self.spec.p
        rest = np.setdiff1d(np.arange(p), self.spec.shock_index)
        root = np.zeros((p, p))
        if rest.size:
            values, vectors = np.linalg.eigh(self.sigma_w[np.ix_(rest, rest)])
            values = np.clip(values, 0.0, None)
            root[np.ix_(rest, rest)] = (vectors * np.sqrt(values)) @ vectors.T
        return root

    def impulse_responses(self, horizon: int) -> Tuple[np.ndarray, ...]:
        """True Θ_h = Ψ_hB for h = 0..H."""
        psi = ma_coefficients(self.model, horizon).psi
        return tuple(coefficient @ self.impact for coefficient in psi)


# ================================ Generation ================================


def keep_largest(
    matrix: np.ndarray, count: int, axis: int = 1, forced=None
) -> np.ndarray:
    """Zeroes entries from the smallest magnitude up until ``count`` remain per row.

    Args:
        matrix: Input.
        count: Entries to keep per row (``axis=1``) or column (``axis=0``).
        axis: Direction of the count.
        forced: Boolean mask of entries always kept (they count towards ``count``).
    """

    work = np.asarray(matrix, dtype=float)
    if axis == 0:
        work = work.T
        forced = None if forced is None else np.asarray(forced).T

    out = np.zeros_like(work)
    for i, row in enumerate(work):
        priority = np.abs(row).copy()
        if forced is not None:
            priority[forced[i]] = np.inf
        keep = np.argsort(-priority, kind="stable")[:count]
        out[i, keep] = row[keep]

    return out.T if axis == 0 else out


def _calibrate(
    stacked: np.ndarray, lags: int, target: float, tol: float
) -> Optional[np.ndarray]:
    """Scales the slopes by one common factor to a companion radius of ``target``."""

    def radius(scale):
        model = SparseVarModel.from_stacked(scale * stacked, lags)
        return spectral_radius(companion(model))

    if radius(1.0) == 0.0:
        return None

    low, high = 0.0, 1.0
    for _ in range(200):
        if radius(high) >= target:
            break
        low, high = high, 2 * high
    else:
        return None

    for _ in range(200):
        middle = (low + high) / 2
        value = radius(middle)
        if abs(value - target) < tol:
            return middle * stacked
        if value < target:
            low = middle
        else:
            high = middle
    return None


def _symmetric_truncate(matrix: np.ndarray, count: int) -> np.ndarray:
    """Keeps the diagonal and the largest off-diagonal pairs, at most count per row."""
    p = matrix.shape[0]
    out = np.diag(np.diag(matrix))
    used = np.ones(p, dtype=int)
    rows, cols = np.triu_indices(p, k=1)
    order = np.argsort(-np.abs(matrix[rows, cols]), kind="stable")
    for k in order:
        i, j = rows[k], cols[k]
        if matrix[i, j] == 0:
            break
        if used[i] < count and used[j] < count:
            out[i, j] = out[j, i] = matrix[i, j]
            used[i] += 1
            used[j] += 1
    return out


def _draw_slopes(
    spec: DgpSpec, rng: np.random.Generator, settings: Settings
) -> np.ndarray:
    p, d = spec.p, spec.lags
    for attempt in range(settings.max_redraws):
        candidate = keep_largest(rng.standard_normal((p, d * p)), spec.k_a)
        scaled = _calibrate(candidate, d, spec.radius, settings.radius_tol)
        if scaled is not None:
            return scaled
        logger.debug("Slope draw %d could not be calibrated; redrawing", attempt)
    err = "No calibratable slope draw in {} attempts.".format(settings.max_redraws)
    raise NumericalError(err)


def _draw_covariances(
    spec: DgpSpec, rng: np.random.Generator
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Draws (B, Σ_w) in the ordering where 𝓘 comes first."""
    p, k = spec.p, spec.n_shocks
    low, high = spec.eig_low, spec.eig_high

    values = rng.uniform(low, high, size=p)
    if p > 1:
        vectors = scipy.stats.ortho_group.rvs(p, random_state=rng)
    else:
        vectors = np.ones((1, 1))
    sigma = (vectors * values) @ vectors.T
    factor = np.linalg.cholesky((sigma + sigma.T) / 2)

    impact = factor[:, :k]
    forced = np.zeros_like(impact, dtype=bool)
    forced[np.arange(k), np.arange(k)] = True
    impact = keep_largest(impact, spec.k_b, axis=0, forced=forced)

    remainder = np.zeros((p, p))
    if p > k:
        tail = factor[k:, k:]
        block = _symmetric_truncate(tail @ tail.T, spec.k_d)
        floor = np.linalg.eigvalsh(block).min()
        if floor < 0:
            block = block + (1e-3 - floor) * np.eye(p - k)
        remainder[k:, k:] = block

    # Rescale to the top of the range, then lift the floor through Σ_w's diagonal.
    for _ in range(50):
        spectrum = np.linalg.eigvalsh(impact @ impact.T + remainder)
        scale = high / spectrum.max()
        impact = impact * np.sqrt(scale)
        remainder = remainder * scale
        spectrum = spectrum * scale
        if spectrum.min() >= low * (1 - 1e-9):
            return impact, remainder
        if p == k:
            return None
        remainder[k:, k:] += (low - spectrum.min()) * np.eye(p - k)

    return None


def generate(spec: DgpSpec, seed: int, settings: Settings = DEFAULTS) -> GeneratedDgp:
    """Draws a DGP satisfying the sparsity, radius and spectrum constraints of ``spec``.

    Args:
        spec: The DGP parameters.
        seed: Seed of the draw.
        settings: Radius tolerance and redraw cap.

    Returns:
        The generated DGP.

    Raises:
        NumericalError: No admissible draw within ``max_redraws`` attempts.
    """

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    stacked = _draw_slopes(spec, rng, settings)

    for attempt in range(settings.max_redraws):
        drawn = _draw_covariances(spec, rng)
        if drawn is not None:
            break
        logger.debug("Covariance draw %d outside the spectrum range", attempt)
    else:
        err = "No admissible covariance draw in {} attempts."
        raise NumericalError(err.format(settings.max_redraws))

    impact_first, remainder_first = drawn
    p = spec.p
    rest = [i for i in range(p) if i not in spec.shock_index]
    order = np.array(list(spec.shock_index) + rest)
    impact = np.zeros_like(impact_first)
    impact[order] = impact_first
    remainder = np.zeros_like(remainder_first)
    remainder[np.ix_(order, order)] = remainder_first

    model = SparseVarModel.from_stacked(stacked, spec.lags)
    dgp = GeneratedDgp(spec, int(seed), model, impact, remainder)
    logger.info(
        "Generated DGP %s (seed %d): radius %.6f, %d slopes",
        spec.name or "custom",
        seed,
        spectral_radius(companion(model)),
        np.count_nonzero(stacked),
    )
    return dgp


# ================================ Simulation ================================


def draw_innovations(
    law: str, size: Tuple[int, int], rng: np.random.Generator
) -> np.ndarray:
    """Unit-variance i.i.d. draws; Student-t(10) is scaled by √(8/10)."""
    if law == "gaussian":
        return rng.standard_normal(size)
    if law == "student_t":
        return rng.standard_t(T_DF, size) * np.sqrt((T_DF - 2) / T_DF)
    raise UsageError("Unknown innovation law {!r}.".format(law))


def simulate(
    dgp: GeneratedDgp,
    n: Optional[int] = None,
    burn_in: int = DEFAULTS.burn_in,
    law: Optional[str] = None,
    rng: Union[np.random.Generator, int, None] = None,
    return_innovations: bool = False,
):
    """Simulates X_t = Σ A_sX_{t−s} + Bu_t + Dw_t from zero start.

    Args:
        dgp: The DGP.
        n: Sample size (``dgp.spec.n`` by default).
        burn_in: Leading points discarded.
        law: Innovation law (``dgp.spec.law`` by default).
        rng: Generator or seed.
        return_innovations: Also return the ε_t of the kept sample.

    Returns:
        The panel, or (panel, innovations).
    """

    n = dgp.spec.n if n is None else n
    law = dgp.spec.law if law is None else law
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    total = n + burn_in
    shocks = draw_innovations(law, (total, dgp.spec.n_shocks), rng)
    noise = draw_innovations(law, (total, dgp.spec.p), rng)
    innovations = shocks @ dgp.impact.T + noise @ dgp.noise_root().T

    panel = dgp.model.simulate(innovations, burn_in=burn_in)
    if return_innovations:
        return panel, innovations[burn_in:]
    return panel
