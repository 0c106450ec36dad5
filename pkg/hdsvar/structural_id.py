# -*- coding: utf-8 -*-
""" Impact estimation, short-run identification and structural impulse responses. """

import abc
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DataError, NotPositiveDefiniteError
from .model_core import MaCoefficients, broadcast_indices

logger = logging.getLogger(__name__)


# ============================ Restriction schemes ============================


class RestrictionScheme(abc.ABC):
    """Maps the covariance of the shock-bearing residuals to a rotation R̂."""

    name = "abstract"

    @abc.abstractmethod
    def rotation(self, covariance: np.ndarray) -> np.ndarray:
        """Returns the k_u×k_u rotation for the given k_u×k_u covariance."""


class CholeskyScheme(RestrictionScheme):
    """Recursive short-run ordering: R̂ is the inverse transposed Cholesky factor."""

    name = "cholesky"

    def rotation(self, covariance: np.ndarray) -> np.ndarray:
        return cholesky_rotation(covariance)

    def __eq__(self, other) -> bool:
        return isinstance(other, CholeskyScheme)

    def __hash__(self) -> int:
        return hash(self.name)

    def __repr__(self) -> str:
        return "CholeskyScheme()"


@dataclass(frozen=True)
class StructuralSpec:
    """Shock-bearing variables 𝓘 (0-based, in Cholesky order) and the scheme.

    Raises:
        DataError: 𝓘 is empty or has duplicates.
    """

    shock_index: Tuple[int, ...]
    scheme: RestrictionScheme = field(default_factory=CholeskyScheme)

    def __post_init__(self) -> None:
        index = tuple(int(i) for i in self.shock_index)
        if not index:
            raise DataError("The shock index set must not be empty.")
        if len(set(index)) != len(index) or min(index) < 0:
            err = "Shock indices must be distinct and non-negative: {}.".format(index)
            raise DataError(err)
        object.__setattr__(self, "shock_index", index)

    @property
    def n_shocks(self) -> int:
        return len(self.shock_index)

    def validate(self, p: int) -> None:
        broadcast_indices(self.shock_index, p, "Shock index set")


@dataclass(frozen=True)
class IdentifiedStructure:
    """Estimated contemporaneous structure.

    Attributes:
        shock_index: 𝓘.
        raw_impact: B̃ = Ĉov(ε_t, ε_{t;𝓘}), p×k_u.
        rotation: R̂, k_u×k_u.
        impact: B̂ = B̃R̂.
        shocks: û, (n−d)×k_u.
        remainder: Σ̂_w, sample covariance of ε̂_t − B̂û_t.
        factor: Lower Cholesky factor P of V̂ar(ε̂_{t;𝓘}); None for other schemes.
        scheme: The restriction scheme used.
    """

    shock_index: Tuple[int, ...]
    raw_impact: np.ndarray
    rotation: np.ndarray
    impact: np.ndarray
    shocks: np.ndarray
    remainder: np.ndarray
    factor: Optional[np.ndarray]
    scheme: RestrictionScheme

    @property
    def is_cholesky(self) -> bool:
        return isinstance(self.scheme, CholeskyScheme)


@dataclass(frozen=True)
class IrfSet:
    """Θ̂^{(re)}_h = Ψ̂_hB̂ and Θ̃_h = Ψ̂_hB̃ for h = 0..H."""

    regularized: Tuple[np.ndarray, ...]
    raw: Tuple[np.ndarray, ...]

    @property
    def horizon(self) -> int:
        return len(self.regularized) - 1


# ================================ Operations ================================


def estimate_raw_impact(residuals: np.ndarray, spec: StructuralSpec) -> np.ndarray:
    """B̃ = (1/(n−d)) Σ ε̂_t ε̂_{t;𝓘}ᵀ.

    Raises:
        DataError: Fewer than two residual rows or indices out of range.
    """

    residuals = np.asarray(residuals, dtype=float)
    if residuals.ndim != 2 or residuals.shape[0] < 2:
        err = "Need at least two residual rows, got shape {}.".format(residuals.shape)
        raise DataError(err)
    spec.validate(residuals.shape[1])

    index = list(spec.shock_index)
    return residuals.T @ residuals[:, index] / residuals.shape[0]


def cholesky_factor(covariance: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with positive diagonal.

    Raises:
        NotPositiveDefiniteError: Names the first leading minor that is not positive.
    """

    covariance = np.asarray(covariance, dtype=float)
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        pass

    minor = covariance.shape[0]
    for k in range(1, covariance.shape[0] + 1):
        try:
            np.linalg.cholesky(covariance[:k, :k])
        except np.linalg.LinAlgError:
            minor = k
            break

    err = "Covariance is not positive definite: leading minor {} fails.".format(minor)
    raise NotPositiveDefiniteError(err, minor=minor)


def cholesky_rotation(covariance: np.ndarray) -> np.ndarray:
    """R̂ = (P⁻¹)ᵀ where V = PPᵀ, so that R̂ᵀVR̂ = I."""
    factor = cholesky_factor(covariance)
    identity = np.eye(factor.shape[0])
    return scipy.linalg.solve_triangular(factor, identity, lower=True).T


def structural_shocks(
    residuals: np.ndarray, shock_index: Sequence[int], rotation: np.ndarray
) -> np.ndarray:
    """û_t = R̂ᵀ ε̂_{t;𝓘}, stacked as rows."""
    return np.asarray(residuals)[:, list(shock_index)] @ rotation


def impact_remainder(
    residuals: np.ndarray, shock_index: Sequence[int], rotation: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """B̂ and Σ̂_w computed on a block of residuals for a fixed rotation.

    Returns:
        (B̂, Σ̂_w) with B̂ = B̃R̂ and Σ̂_w the second moment of ε̂_t − B̂û_t.
    """

    residuals = np.asarray(residuals, dtype=float)
    m = residuals.shape[0]
    index = list(shock_index)
    impact = residuals.T @ residuals[:, index] / m @ rotation
    remainder = residuals - structural_shocks(residuals, index, rotation) @ impact.T
    return impact, remainder.T @ remainder / m


def identify(residuals: np.ndarray, spec: StructuralSpec) -> IdentifiedStructure:
    """Estimates B̃, R̂, B̂, û and Σ̂_w from (centered) residuals.

    Args:
        residuals: (n−d)×p residual matrix.
        spec: Shock index set and restriction scheme.

    Returns:
        The identified structure.
    """

    raw = estimate_raw_impact(residuals, spec)
    index = list(spec.shock_index)
    covariance = raw[index]
    covariance = (covariance + covariance.T) / 2

    factor = None
    if isinstance(spec.scheme, CholeskyScheme):
        factor = cholesky_factor(covariance)
        rotation = scipy.linalg.solve_triangular(
            factor, np.eye(factor.shape[0]), lower=True
        ).T
    else:
        rotation = np.asarray(spec.scheme.rotation(covariance), dtype=float)

    impact, remainder = impact_remainder(residuals, index, rotation)
    shocks = structural_shocks(residuals, index, rotation)

    condition = np.linalg.cond(impact[index])
    logger.debug("Impact block condition %.4g (%s scheme)", condition, spec.scheme.name)

    return IdentifiedStructure(
        shock_index=tuple(index),
        raw_impact=raw,
        rotation=rotation,
        impact=impact,
        shocks=shocks,
        remainder=(remainder + remainder.T) / 2,
        factor=factor,
        scheme=spec.scheme,
    )


def regularized_irf(
    ma: MaCoefficients, impact: np.ndarray, raw_impact: np.ndarray
) -> IrfSet:
    """Θ̂_h = Ψ̂_hB̂ and Θ̃_h = Ψ̂_hB̃ for every horizon of ``ma``.

    Raises:
        DataError: B̂ and B̃ differ in shape.
    """

    impact = np.asarray(impact, dtype=float)
    raw_impact = np.asarray(raw_impact, dtype=float)
    if raw_impact.shape != impact.shape:
        err = "B̃ has shape {}, B̂ has {}.".format(raw_impact.shape, impact.shape)
        raise DataError(err)

    regularized = tuple(psi @ impact for psi in ma.psi)
    regularized = (impact.copy(),) + regularized[1:]
    raw = tuple(psi @ raw_impact for psi in ma.psi)
    return IrfSet(regularized, raw)
