# -*- coding: utf-8 -*-
""" Thresholding of slopes and cross-validated regularization of impact and noise. """

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .config import DEFAULTS, Settings
from .errors import DataError, UsageError
from .interface import FrozenSet
from .model_core import SparseVarModel
from .sparse_regression import VarFit
from .structural_id import IdentifiedStructure, impact_remainder

logger = logging.getLogger(__name__)

KINDS = FrozenSet({"soft", "hard", "adaptive"})


@dataclass(frozen=True)
class ThresholdRule:
    """THR_λ(z) = z(1 − |λ/z|^ν)_+; soft is ν = 1, hard is ν → ∞.

    Raises:
        UsageError: Unknown kind, negative λ, or ν < 1.
    """

    kind: str = "soft"
    penalty: float = 0.0
    nu: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            err = "Threshold kind must be one of {}, got {!r}.".format(KINDS, self.kind)
            raise UsageError(err)
        if self.penalty < 0:
            err = "Threshold must be non-negative, got {}.".format(self.penalty)
            raise UsageError(err)
        if self.kind == "adaptive" and self.nu < 1:
            err = "Adaptive thresholding needs ν ≥ 1, got {}.".format(self.nu)
            raise UsageError(err)
        if self.kind == "soft":
            object.__setattr__(self, "nu", 1.0)
        if self.kind == "hard":
            object.__setattr__(self, "nu", float("inf"))

    def with_penalty(self, penalty: float) -> "ThresholdRule":
        return ThresholdRule(self.kind, penalty, self.nu)


@dataclass(frozen=True)
class RegularizedCovariances:
    """Thresholded B̂^{(re)} and Σ̂_w^{(re)}, with Σ̂_ε^{(re)} = B̂B̂ᵀ + Σ̂_w."""

    impact: np.ndarray
    sigma_w: np.ndarray
    sigma_eps: np.ndarray
    lambda_b: float
    lambda_w: float


def threshold_matrix(matrix: np.ndarray, rule: ThresholdRule) -> np.ndarray:
    """Elementwise THR_λ; the shape is preserved."""
    z = np.asarray(matrix, dtype=float)
    level = rule.penalty
    if rule.kind == "soft":
        return np.sign(z) * np.maximum(np.abs(z) - level, 0.0)
    if rule.kind == "hard":
        return np.where(np.abs(z) > level, z, 0.0)

    out = np.zeros_like(z)
    nonzero = z != 0
    ratio = np.abs(level / z[nonzero]) ** rule.nu
    out[nonzero] = z[nonzero] * np.maximum(1.0 - ratio, 0.0)
    return out


def thr(value: float, rule: ThresholdRule) -> float:
    """Scalar THR_λ(z)."""
    return float(threshold_matrix(np.asarray(value, dtype=float), rule))


def threshold_slopes(
    fit: Union[VarFit, SparseVarModel],
    penalties: Optional[Sequence[float]] = None,
    rule: ThresholdRule = ThresholdRule("hard"),
) -> SparseVarModel:
    """Â^{(thr)}: row i of (Â_1, …, Â_d) thresholded at that row's λ_A.

    Args:
        fit: Row-wise fit (its selected penalties are used) or a bare model.
        penalties: Per-row thresholds, required with a bare model.
        rule: Rule kind; its own penalty is ignored.
    """

    if isinstance(fit, VarFit):
        model = fit.model
        if penalties is None:
            penalties = fit.penalties
    else:
        model = fit

    if penalties is None:
        raise UsageError("Row thresholds are needed to threshold a bare model.")

    penalties = np.asarray(penalties, dtype=float)
    stacked = model.stacked
    if penalties.shape != (stacked.shape[0],):
        err = "Expected {} row thresholds, got {}."
        raise UsageError(err.format(stacked.shape[0], penalties.shape))

    rows = [
        threshold_matrix(row, rule.with_penalty(level))
        for row, level in zip(stacked, penalties)
    ]
    return SparseVarModel.from_stacked(np.vstack(rows), model.lags)


# =============================== Cross-validation ===============================


def contiguous_folds(m: int, folds: int):
    """Splits 0..m−1 into ``folds`` contiguous blocks."""
    return np.array_split(np.arange(m), folds)


def _offdiagonal(matrix: np.ndarray) -> np.ndarray:
    return matrix - np.diag(np.diag(matrix))


def _threshold_covariance(matrix: np.ndarray, rule: ThresholdRule) -> np.ndarray:
    # Diagonal kept as estimated.
    out = threshold_matrix(_offdiagonal(matrix), rule) + np.diag(np.diag(matrix))
    return (out + out.T) / 2


def cross_validate(
    residuals: np.ndarray,
    estimate: Callable[[np.ndarray], np.ndarray],
    apply: Callable[[np.ndarray, float], np.ndarray],
    grid: np.ndarray,
    folds: int,
) -> float:
    """Selects λ on ``grid`` by K-fold contiguous cross-validation.

    For each held-out fold the estimate built on the other folds is thresholded and
    scored by squared Frobenius distance to the raw estimate on the held-out fold.

    Returns:
        The λ with the smallest average score; ties go to the larger λ.
    """

    scores = np.zeros(len(grid))
    m = residuals.shape[0]
    for block in contiguous_folds(m, folds):
        train = np.delete(np.arange(m), block)
        fitted = estimate(residuals[train])
        held = estimate(residuals[block])
        for g, level in enumerate(grid):
            scores[g] += np.sum((apply(fitted, level) - held) ** 2)

    scores /= folds
    order = np.argsort(grid, kind="stable")
    best = order[0]
    for g in order:
        if scores[g] <= scores[best]:
            best = g
    return float(grid[best])


def _grid(matrix: np.ndarray, size: int) -> np.ndarray:
    top = float(np.max(np.abs(matrix), initial=0.0))
    if top == 0.0:
        return np.zeros(1)
    return np.linspace(0.0, top, size)


def regularize_covariances(
    residuals: np.ndarray,
    structure: IdentifiedStructure,
    rule: ThresholdRule = ThresholdRule("soft"),
    lambda_b: Optional[float] = None,
    lambda_w: Optional[float] = None,
    grid_b: Optional[Sequence[float]] = None,
    grid_w: Optional[Sequence[float]] = None,
    settings: Settings = DEFAULTS,
) -> RegularizedCovariances:
    """Thresholds B̂ = B̃R̂ and the off-diagonal of Σ̂_w with cross-validated levels.

    Args:
        residuals: (n−d)×p centered residuals.
        structure: Identified structure (supplies 𝓘, R̂, B̂ and Σ̂_w).
        rule: Threshold kind (soft by default).
        lambda_b: Fixed λ_B, skipping cross-validation.
        lambda_w: Fixed λ_w, skipping cross-validation.
        grid_b: Candidate λ_B values; defaults to ``cv_grid`` points on [0, max|B̂|].
        grid_w: Candidate λ_w values; defaults to ``cv_grid`` points on [0, max|Σ̂_w|]
            over the off-diagonal.
        settings: Fold count and grid size.

    Returns:
        The regularized matrices and the selected levels.

    Raises:
        DataError: Fewer than 2K residual rows.
    """

    residuals = np.asarray(residuals, dtype=float)
    folds = settings.cv_folds
    index = structure.shock_index
    rotation = structure.rotation

    needs_cv = lambda_b is None or lambda_w is None
    if needs_cv and residuals.shape[0] < 2 * folds:
        err = "Cross-validation with {} folds needs at least {} residual rows, got {}."
        raise DataError(err.format(folds, 2 * folds, residuals.shape[0]))

    def impact_of(block):
        return impact_remainder(block, index, rotation)[0]

    def remainder_of(block):
        return impact_remainder(block, index, rotation)[1]

    def threshold_impact(matrix, level):
        return threshold_matrix(matrix, rule.with_penalty(level))

    def threshold_remainder(matrix, level):
        return _threshold_covariance(matrix, rule.with_penalty(level))

    if lambda_b is None:
        if grid_b is None:
            grid = _grid(structure.impact, settings.cv_grid)
        else:
            grid = np.asarray(grid_b, dtype=float)
        lambda_b = cross_validate(residuals, impact_of, threshold_impact, grid, folds)

    if lambda_w is None:
        if grid_w is None:
            grid = _grid(_offdiagonal(structure.remainder), settings.cv_grid)
        else:
            grid = np.asarray(grid_w, dtype=float)
        lambda_w = cross_validate(
            residuals, remainder_of, threshold_remainder, grid, folds
        )

    impact = threshold_matrix(structure.impact, rule.with_penalty(lambda_b))
    sigma_w = _threshold_covariance(structure.remainder, rule.with_penalty(lambda_w))
    sigma_eps = impact @ impact.T + sigma_w
    sigma_eps = (sigma_eps + sigma_eps.T) / 2

    logger.info("Selected λ_B=%.4g and λ_w=%.4g", lambda_b, lambda_w)
    return RegularizedCovariances(
        impact, sigma_w, sigma_eps, float(lambda_b), float(lambda_w)
    )
