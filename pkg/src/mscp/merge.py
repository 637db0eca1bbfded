"""Merging per-source prediction sets and per-source conformal p-values."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .wcp import IntervalUnion, LabelSet, RegressionInterval

LEVEL_TOL = 1e-12


@dataclass(frozen=True)
class GammaVote:
    """Keep ``y`` when more than a ``gamma`` share of sources keep it."""

    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")

    @property
    def exact(self) -> Fraction:
        """gamma as a rational, snapping floats like (K-1)/K to their fraction."""
        snapped = Fraction(self.gamma).limit_denominator(10**6)
        return snapped if abs(float(snapped) - self.gamma) <= 1e-15 else Fraction(self.gamma)

    def source_alpha(self, alpha: float) -> float:
        """Miscoverage each per-source set must be built at."""
        return float(1 - self.exact) * alpha

    @property
    def name(self) -> str:
        return f"GammaVote({self.gamma:g})"


@dataclass(frozen=True)
class BonferroniMin:
    name = "BonferroniMin"


@dataclass(frozen=True)
class TwiceMean:
    name = "TwiceMean"


MergeRule = GammaVote | BonferroniMin | TwiceMean


def majority_vote() -> GammaVote:
    return GammaVote(0.5)


def bonferroni_vote(K: int) -> GammaVote:
    return GammaVote((K - 1) / K)


# ---------------------------------------------------------------------------
# set voting


def _vote_passes(counts, K: int, gamma: float) -> np.ndarray:
    """``counts / K > gamma`` in integers; float ``gamma * K`` drifts for ``gamma = (K-1)/K``."""
    g = GammaVote(gamma).exact
    return np.asarray(counts) * g.denominator > g.numerator * K


def _vote_intervals(intervals, K: int, gamma: float) -> tuple[tuple[float, float], ...]:
    """Exact endpoint sweep: points where ``count / K > gamma``."""
    lo = np.sort(np.array([a for a, _ in intervals], dtype=float))
    hi = np.sort(np.array([b for _, b in intervals], dtype=float))
    coords = np.unique(np.concatenate([lo, hi]))

    # closed intervals: [a, b] covers c iff a <= c <= b
    at_point = np.searchsorted(lo, coords, side="right") - np.searchsorted(hi, coords, side="left")
    # open gap (c_i, c_{i+1}) is covered by intervals with a <= c_i and b >= c_{i+1}
    in_gap = np.searchsorted(lo, coords[:-1], side="right") - np.searchsorted(hi, coords[:-1], side="right")

    keep_pt = _vote_passes(at_point, K, gamma)
    keep_gap = _vote_passes(in_gap, K, gamma)
    pieces = []
    start = None
    for i, c in enumerate(coords):
        if keep_pt[i] and start is None:
            start = c
        gap_open = i < len(coords) - 1 and keep_gap[i]
        if start is not None and not gap_open:
            pieces.append((float(start), float(c)))
            start = None
    return tuple(pieces)


def _check_levels(sets, gamma: float, alpha: float | None) -> None:
    if alpha is None:
        return
    want = 1.0 - GammaVote(gamma).source_alpha(alpha)
    for s in sets:
        if s.level is None or abs(s.level - want) > LEVEL_TOL:
            raise ValueError(
                f"per-source set built at level {s.level}, vote needs {want} "
                f"(1 - (1 - gamma) * alpha)"
            )


def merged_set_vote(per_source_sets, gamma: float, K: int | None = None, alpha: float | None = None):
    """Merge ``K`` per-source sets by a gamma vote.

    Membership is ``(1/K) * #{k : y in C_k} > gamma``. Interval inputs give an
    :class:`IntervalUnion` computed exactly; label sets give a :class:`LabelSet`.
    When ``alpha`` is passed, each set's level tag is checked against the
    adjusted level ``1 - (1 - gamma) * alpha``.
    """
    sets = list(per_source_sets)
    if K is None:
        K = len(sets)
    if K < 1 or len(sets) != K:
        raise ValueError(f"expected {K} per-source sets, got {len(sets)}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    _check_levels(sets, gamma, alpha)
    level = None if alpha is None else 1.0 - alpha

    if all(isinstance(s, LabelSet) for s in sets):
        n_classes = sets[0].n_classes
        if any(s.n_classes != n_classes for s in sets):
            raise ValueError("label sets disagree on the number of classes")
        counts = np.zeros(n_classes, dtype=int)
        for s in sets:
            counts[list(s.members)] += 1
        return LabelSet(frozenset(np.flatnonzero(_vote_passes(counts, K, gamma)).tolist()), n_classes, level)

    if all(isinstance(s, (RegressionInterval, IntervalUnion)) for s in sets):
        intervals = [piece for s in sets for piece in s.intervals()]
        if not intervals:
            return IntervalUnion((), level)
        return IntervalUnion(_vote_intervals(intervals, K, gamma), level)

    raise TypeError("cannot merge label sets with intervals")


def intersect_intervals(sets) -> IntervalUnion:
    """Intersection of single closed intervals (the Bonferroni reference)."""
    lo = max(s.lo for s in sets)
    hi = min(s.hi for s in sets)
    return IntervalUnion(((lo, hi),) if lo <= hi else ())


# ---------------------------------------------------------------------------
# p-value merging


def _exceeds(p: np.ndarray, coeff: Fraction, alpha: np.ndarray) -> np.ndarray:
    """Exact ``p > coeff * alpha`` on floats; near-ties are settled with rationals."""
    cut = float(coeff) * alpha
    out = p > cut
    near = np.abs(p - cut) <= 4 * np.spacing(np.abs(cut))
    for idx in zip(*np.nonzero(near)):
        out[idx] = Fraction(float(p[idx])) > coeff * Fraction(float(alpha[idx]))
    return out


def merge_p_values_batch(rule, P, alpha) -> np.ndarray:
    """Row-wise merged p-values for an ``(N, K)`` array and one or ``N`` levels."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] < 1:
        raise ValueError("need an (N, K) array with K >= 1")
    if np.any(P <= 0) or np.any(P > 1):
        raise ValueError("p-values must lie in (0, 1]")
    N, K = P.shape
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (N,))
    if isinstance(rule, GammaVote):
        if rule.gamma == 0:
            raise ValueError("gamma vote p-value is undefined for gamma = 0")
        g = rule.exact
        passing = _exceeds(P, 1 - g, np.broadcast_to(alpha[:, None], P.shape)).sum(axis=1)
        # passing / (K gamma) as one correctly rounded integer ratio, so
        # K - 1 passing votes at gamma = (K-1)/K give exactly alpha
        return alpha * ((passing * g.denominator) / (K * g.numerator))
    if isinstance(rule, BonferroniMin):
        return np.minimum(1.0, K * P.min(axis=1))
    if isinstance(rule, TwiceMean):
        return np.minimum(1.0, 2.0 * P.mean(axis=1))
    raise TypeError(f"unknown merge rule {rule!r}")


def merge_p_values(rule, p, alpha: float) -> float:
    """Merged p-value ``g(p_1, ..., p_K, alpha)`` for a valid merging rule."""
    p = np.asarray(p, dtype=float).ravel()
    if p.size < 1:
        raise ValueError("need at least one p-value")
    return float(merge_p_values_batch(rule, p[None, :], alpha)[0])


def merged_set_from_pvalues(rule, pvalue_fn, alpha: float, candidates, n_classes: int | None = None):
    """Invert a merged p-value: keep candidates with ``g(p(y), alpha) > alpha``.

    ``pvalue_fn(y)`` returns the K per-source p-values at ``y``. With
    ``n_classes`` the candidates are labels and the result is exact; otherwise
    they are a sorted grid of responses and the result is the union of
    grid-point runs (accurate to the grid spacing).
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate collection is empty")
    keep = [merge_p_values(rule, pvalue_fn(y), alpha) > alpha for y in candidates]
    if n_classes is not None:
        return LabelSet(frozenset(int(y) for y, k in zip(candidates, keep) if k), n_classes, 1.0 - alpha)

    grid = np.asarray(candidates, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("regression candidates must be strictly increasing")
    pieces = []
    start = None
    for i, k in enumerate(keep):
        if k and start is None:
            start = grid[i]
        if start is not None and (not k or i == len(keep) - 1):
            end = grid[i] if k else grid[i - 1]
            pieces.append((float(start), float(end)))
            start = None
    return IntervalUnion(tuple(pieces), 1.0 - alpha)


def regression_grid(center: float, radius: float, n_points: int = 2001, pad: float = 0.1) -> np.ndarray:
    """Evenly spaced candidates over ``center +/- (1 + pad) * radius``."""
    half = (1.0 + pad) * radius
    return np.linspace(center - half, center + half, n_points)
