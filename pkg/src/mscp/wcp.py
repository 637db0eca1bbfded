"""Single-source weighted conformal prediction: thresholds, sets and p-values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import score_abs_residual, score_one_minus_prob
from .weighted_quantile import DegenerateWeightsError, WeightedScoreDistribution


@dataclass(frozen=True, eq=False)
class CalibrationScores:
    """Calibration nonconformity scores with their likelihood-ratio weights."""

    scores: np.ndarray
    ratios: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float).ravel()
        w = np.asarray(self.ratios, dtype=float).ravel()
        if s.size < 1 or s.shape != w.shape:
            raise ValueError("need n >= 1 scores with one ratio each")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
            raise ValueError("scores and ratios must be finite")
        if np.any(w < 0):
            raise ValueError("ratios must be nonnegative")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "ratios", w)

    @classmethod
    def unweighted(cls, scores) -> "CalibrationScores":
        scores = np.asarray(scores, dtype=float)
        return cls(scores, np.ones_like(scores))

    def __len__(self) -> int:
        return self.scores.size


# ---------------------------------------------------------------------------
# prediction sets


@dataclass(frozen=True)
class RegressionInterval:
    """Closed interval ``{y : |y - center| <= radius}``; ``radius=inf`` is the real line."""

    center: float
    radius: float
    level: float | None = None

    def __post_init__(self):
        if not (self.radius >= 0):
            raise ValueError("radius must be >= 0 or +inf")

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.radius))

    @property
    def length(self) -> float:
        return 2.0 * self.radius

    def contains(self, y) -> bool:
        return bool(abs(y - self.center) <= self.radius)

    def intervals(self) -> tuple[tuple[float, float], ...]:
        return ((self.lo, self.hi),)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint closed intervals, sorted left to right.

    Endpoints may be infinite; an empty tuple is the empty set.
    """

    pieces: tuple[tuple[float, float], ...]
    level: float | None = None

    @property
    def is_finite(self) -> bool:
        return all(np.isfinite(lo) and np.isfinite(hi) for lo, hi in self.pieces)

    @property
    def length(self) -> float:
        # total Lebesgue measure, so disjoint unions are not undercounted
        return float(sum(hi - lo for lo, hi in self.pieces))

    def contains(self, y) -> bool:
        return any(lo <= y <= hi for lo, hi in self.pieces)

    def intervals(self) -> tuple[tuple[float, float], ...]:
        return self.pieces


@dataclass(frozen=True)
class LabelSet:
    members: frozenset
    n_classes: int
    level: float | None = None

    @property
    def is_finite(self) -> bool:
        return True

    @property
    def is_full(self) -> bool:
        return len(self.members) == self.n_classes

    @property
    def size(self) -> int:
        return len(self.members)

    def contains(self, y) -> bool:
        return int(y) in self.members


PredictionSet = RegressionInterval | IntervalUnion | LabelSet


# ---------------------------------------------------------------------------
# thresholds and p-values


def wcp_threshold(cal: CalibrationScores, test_ratio: float, alpha: float) -> float:
    """Level ``1 - alpha`` quantile of the reweighted calibration scores.

    The test point's ratio goes to a point mass at +inf, so the result is
    +inf whenever the finite scores cannot reach the level.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    dist = WeightedScoreDistribution.from_ratios(cal.scores, cal.ratios, test_ratio)
    return dist.quantile(1.0 - alpha)


def wcp_interval_regression(prediction: float, threshold: float, level=None) -> RegressionInterval:
    return RegressionInterval(float(prediction), float(threshold), level)


def wcp_set_classification(probs, threshold: float, level=None) -> LabelSet:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must form a simplex")
    if np.isinf(threshold):
        members = range(probs.size)
    else:
        members = np.flatnonzero(1.0 - probs <= threshold).tolist()
    return LabelSet(frozenset(members), probs.size, level)


def weighted_p_value(cal: CalibrationScores, test_ratio: float, test_score: float) -> float:
    """Share of ratio weight on calibration scores ``>= test_score``, test point included."""
    w0 = float(test_ratio)
    total = cal.ratios.sum() + w0
    if not total > 0:
        raise DegenerateWeightsError("total likelihood-ratio weight is zero")
    hits = cal.ratios[cal.scores >= test_score].sum()
    # rounding in the sums can exceed 1 by an ulp
    return min(1.0, float((hits + w0) / total))


def weighted_p_values(cal: CalibrationScores, test_ratio: float, test_scores) -> np.ndarray:
    """Vectorized :func:`weighted_p_value` over many candidate scores."""
    test_scores = np.asarray(test_scores, dtype=float)
    w0 = float(test_ratio)
    total = cal.ratios.sum() + w0
    if not total > 0:
        raise DegenerateWeightsError("total likelihood-ratio weight is zero")
    order = np.argsort(cal.scores, kind="stable")
    s_sorted = cal.scores[order]
    # tail sums of weights over scores >= t
    tail = np.concatenate([np.cumsum(cal.ratios[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(s_sorted, test_scores, side="left")
    return np.minimum(1.0, (tail[idx] + w0) / total)


def wcp_regression_set(cal: CalibrationScores, test_ratio, prediction, alpha) -> RegressionInterval:
    """Absolute-residual WCP interval around ``prediction``."""
    t = wcp_threshold(cal, test_ratio, alpha)
    return wcp_interval_regression(prediction, t, level=1.0 - alpha)


def wcp_classification_set(cal: CalibrationScores, test_ratio, probs, alpha) -> LabelSet:
    """One-minus-probability WCP label set."""
    t = wcp_threshold(cal, test_ratio, alpha)
    return wcp_set_classification(probs, t, level=1.0 - alpha)


# ---------------------------------------------------------------------------
# score adapters: a fitted predictor plus the matching score and set inversion


class AbsResidualScore:
    """``|y - m(x)|`` for a regression predictor ``m``; sets are intervals."""

    def __init__(self, predictor):
        self.predictor = predictor

    def scores(self, X, y) -> np.ndarray:
        return score_abs_residual(self.predictor(X), y)

    def prediction(self, x) -> float:
        return float(np.ravel(self.predictor(np.atleast_2d(x)))[0])

    def build_set(self, x, threshold: float, level=None) -> RegressionInterval:
        return wcp_interval_regression(self.prediction(x), threshold, level)


class OneMinusProbScore:
    """``1 - p(x)_y`` for a classifier returning probability rows; sets are label sets."""

    def __init__(self, predict_proba):
        self.predict_proba = predict_proba

    def scores(self, X, y) -> np.ndarray:
        return score_one_minus_prob(self.predict_proba(X), np.asarray(y))

    def probs(self, x) -> np.ndarray:
        return np.asarray(self.predict_proba(np.atleast_2d(x)))[0]

    def build_set(self, x, threshold: float, level=None) -> LabelSet:
        return wcp_set_classification(self.probs(x), threshold, level)


def wcp_set(cal_X, cal_y, ratio, scorer, x, alpha: float, feature_map=None):
    """Weighted conformal set at ``x`` from raw calibration data.

    ``ratio`` is evaluated on ``feature_map(X)``; the predictor inside
    ``scorer`` is applied to raw inputs.
    """
    phi = feature_map if feature_map is not None else (lambda v: np.asarray(v, dtype=float))
    cal = CalibrationScores(scorer.scores(cal_X, cal_y), np.atleast_1d(ratio(phi(cal_X))))
    w0 = float(np.ravel(ratio(phi(np.atleast_2d(x))))[0])
    t = wcp_threshold(cal, w0, alpha)
    return scorer.build_set(x, t, level=1.0 - alpha)
