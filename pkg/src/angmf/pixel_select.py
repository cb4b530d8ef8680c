"""Uncertainty-guided pixel selection.

Splits a per-step sampling budget between an importance set (the most
uncertain valid pixels) and a coverage set (a uniform draw from the rest)
so training keeps pressure on hard regions without starving easy ones.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientPixels, ShapeError

__all__ = ["SelectionConfig", "PixelSelection", "select_pixels"]


@dataclass(frozen=True)
class SelectionConfig:
    """r_s: fraction of valid pixels to select; beta_ug: importance share."""

    r_s: float = 0.4
    beta_ug: float = 0.7

    def __post_init__(self):
        if not 0.0 < self.r_s <= 1.0:
            raise DomainError(f"r_s must lie in (0, 1], got {self.r_s}")
        if not 0.0 <= self.beta_ug <= 1.0:
            raise DomainError(f"beta_ug must lie in [0, 1], got {self.beta_ug}")


@dataclass(frozen=True)
class PixelSelection:
    """Disjoint sets of flat (row-major) pixel indices, each sorted ascending."""

    importance: np.ndarray
    coverage: np.ndarray

    @property
    def all_indices(self):
        return np.sort(np.concatenate([self.importance, self.coverage]))


def select_pixels(uncertainty, valid, config, rng):
    """Select round(r_s * n_valid) pixels, split into importance and coverage.

    The importance set holds the floor(beta_ug * N_s) valid pixels with
    the highest uncertainty (ties broken by ascending flat index); the
    coverage set is drawn uniformly without replacement from the remaining
    valid pixels via a partial Fisher-Yates shuffle on ``rng``.  Arrays
    may be 2-d grids or already flat; indices always refer to the
    row-major flattening.
    """
    unc = np.asarray(uncertainty, dtype=np.float64).ravel()
    v = np.asarray(valid, dtype=bool).ravel()
    if unc.shape != v.shape:
        raise ShapeError(f"uncertainty {np.shape(uncertainty)} vs valid {np.shape(valid)}")
    if not np.all(np.isfinite(unc[v])):
        raise DomainError("uncertainty must be finite at valid pixels")

    candidates = np.flatnonzero(v)
    n_valid = candidates.size
    n_select = int(np.floor(config.r_s * n_valid + 0.5))  # round half up
    if n_select > n_valid:
        raise InsufficientPixels(f"need {n_select} pixels but only {n_valid} are valid")
    n_importance = int(np.floor(config.beta_ug * n_select))

    # stable sort on -uncertainty keeps ascending-index order within ties
    order = np.argsort(-unc[candidates], kind="stable")
    importance = candidates[order[:n_importance]]
    remaining = np.sort(candidates[order[n_importance:]])

    n_coverage = n_select - n_importance
    pool = remaining.copy()
    for i in range(n_coverage):
        j = i + rng.next_below(pool.size - i)
        pool[i], pool[j] = pool[j], pool[i]
    coverage = pool[:n_coverage]

    return PixelSelection(
        importance=np.sort(importance),
        coverage=np.sort(coverage),
    )
