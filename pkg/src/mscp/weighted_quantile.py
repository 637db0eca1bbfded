"""Weighted score distributions with a point mass at +inf, and their quantiles."""

from __future__ import annotations

import numpy as np

# slack at the cumulative-mass comparison; masses like 1/(n+1) do not sum exactly
CUM_SLACK = 1e-9
MASS_TOL = 1e-9


class DegenerateWeightsError(ValueError):
    """All likelihood-ratio weights are zero, so nothing can be normalized."""


def normalize_weights(cal_ratios, test_ratio):
    """Turn calibration and test-point ratios into probability masses.

    Returns ``(p, p0)`` where ``p[i] = w_i / (w0 + sum w)`` and
    ``p0 = w0 / (w0 + sum w)``.
    """
    w = np.asarray(cal_ratios, dtype=float).ravel()
    w0 = float(test_ratio)
    if not (np.all(np.isfinite(w)) and np.isfinite(w0)):
        raise ValueError("ratios must be finite")
    if np.any(w < 0) or w0 < 0:
        raise ValueError("ratios must be nonnegative")
    total = w0 + w.sum()
    if not total > 0:
        raise DegenerateWeightsError("total likelihood-ratio weight is zero")
    return w / total, w0 / total


class WeightedScoreDistribution:
    """Finite atoms ``(score, mass)`` plus ``tail_mass`` sitting at +inf.

    Equal scores are merged on construction and kept sorted, so queries are a
    binary search over the cumulative mass.
    """

    def __init__(self, scores, masses, tail_mass: float):
        scores = np.asarray(scores, dtype=float).ravel()
        masses = np.asarray(masses, dtype=float).ravel()
        tail_mass = float(tail_mass)
        if scores.shape != masses.shape:
            raise ValueError("scores and masses must have equal length")
        if not np.all(np.isfinite(scores)):
            raise ValueError("atom scores must be finite")
        if np.any(masses < 0) or tail_mass < 0 or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and nonnegative")
        if abs(masses.sum() + tail_mass - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {masses.sum() + tail_mass}, expected 1")

        uniq, inverse = np.unique(scores, return_inverse=True)
        merged = np.zeros(uniq.shape)
        # left-to-right accumulation in original order keeps sums deterministic
        np.add.at(merged, inverse, masses)
        self.scores = uniq
        self.masses = merged
        self.tail_mass = tail_mass
        self._cum = np.cumsum(merged)
        for arr in (self.scores, self.masses, self._cum):
            arr.setflags(write=False)

    @classmethod
    def from_ratios(cls, scores, cal_ratios, test_ratio) -> "WeightedScoreDistribution":
        p, p0 = normalize_weights(cal_ratios, test_ratio)
        return cls(scores, p, p0)

    def __len__(self) -> int:
        return self.scores.size

    def __repr__(self) -> str:
        return f"WeightedScoreDistribution(n_atoms={len(self)}, tail_mass={self.tail_mass:.4g})"

    def quantile(self, level: float) -> float:
        if not 0.0 < level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {level}")
        idx = np.searchsorted(self._cum, level - CUM_SLACK, side="left")
        if idx >= self._cum.size:
            return np.inf
        return float(self.scores[idx])


def weighted_quantile(dist: WeightedScoreDistribution, level: float) -> float:
    """Smallest atom ``t`` whose cumulative mass reaches ``level``, else +inf."""
    return dist.quantile(level)
