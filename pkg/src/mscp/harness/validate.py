"""Randomized invariant suites behind ``mscp validate``.

Each suite returns ``(passed, total)``; a release passes only when every
instance of every suite passes.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..datagen import make_rng
from ..merge import GammaVote, bonferroni_vote, merge_p_values_batch, merged_set_vote
from ..models import softmax_loss_and_grad
from ..pool import tv_lower_bound, tv_lower_bound_exact
from ..ratio import GaussianMixtureRatio, OracleGaussian, logistic_loss_and_grad
from ..wcp import CalibrationScores, weighted_p_value, wcp_regression_set, wcp_threshold


def _random_calibration(rng, n_max=20, zeros=True):
    n = int(rng.integers(1, n_max + 1))
    # a coarse score grid forces ties between calibration and test scores
    scores = rng.integers(0, 8, size=n).astype(float) / 2
    ratios = rng.exponential(1.0, size=n)
    if zeros:
        ratios[rng.random(n) < 0.2] = 0.0
    return CalibrationScores(scores, ratios)


def duality_suite(pvalue_fn=weighted_p_value, instances: int = 1000, seed: int = 1):
    """``p(s) > alpha`` exactly when ``s <= threshold``, ties included."""
    rng = make_rng(seed)
    passed = 0
    for _ in range(instances):
        cal = _random_calibration(rng)
        w0 = 0.0 if rng.random() < 0.1 else float(rng.exponential(1.0))
        if cal.ratios.sum() + w0 == 0:
            w0 = 1.0
        alpha = float(rng.uniform(0.01, 0.99))
        if rng.random() < 0.5:
            s = float(rng.choice(cal.scores))
        else:
            s = float(rng.integers(0, 9)) / 2 + rng.choice([0.0, 0.25])
        t = wcp_threshold(cal, w0, alpha)
        passed += bool(pvalue_fn(cal, w0, s) > alpha) == bool(s <= t)
    return int(passed), instances


def split_conformal_suite():
    """Unit ratios give the ``ceil((1 - alpha)(n + 1))``-th order statistic."""
    passed = total = 0
    rng = make_rng(2)
    for n in range(1, 51):
        scores = rng.permutation(n).astype(float) + rng.random(n)
        order = np.sort(scores)
        for alpha in (0.05, 0.1, 0.2):
            k = math.ceil((1 - Fraction(str(alpha))) * (n + 1))
            want = order[k - 1] if k <= n else math.inf
            got = wcp_threshold(CalibrationScores.unweighted(scores), 1.0, alpha)
            passed += got == want
            total += 1
    return int(passed), total


def bonferroni_suite(instances: int = 200, seed: int = 3):
    """The ``(K-1)/K`` vote equals the intersection of level ``1 - alpha/K`` intervals."""
    rng = make_rng(seed)
    passed = 0
    for _ in range(instances):
        K = int(rng.choice([2, 3, 5]))
        alpha = float(rng.uniform(0.05, 0.3))
        rule = bonferroni_vote(K)
        sets = []
        for _k in range(K):
            n = int(rng.integers(20, 60))
            cal = CalibrationScores(rng.exponential(1.0, size=n), rng.exponential(1.0, size=n))
            sets.append(wcp_regression_set(cal, float(rng.exponential(1.0)), float(rng.normal(0, 0.5)), rule.source_alpha(alpha)))
        merged = merged_set_vote(sets, rule.gamma, K=K, alpha=alpha)
        lo = max(s.lo for s in sets)
        hi = min(s.hi for s in sets)
        pieces = merged.intervals()
        if lo > hi:
            ok = pieces == ()
        else:
            ok = len(pieces) == 1 and _close(pieces[0][0], lo) and _close(pieces[0][1], hi)
        passed += ok
    return int(passed), instances


def _close(a, b, tol=1e-12):
    return a == b or abs(a - b) <= tol


def kmin_suite(instances: int = 100_000, seed: int = 4):
    """The ``(K-1)/K`` vote p-value exceeds alpha exactly when ``K min p`` does.

    A third of the draws put one p-value on the ``alpha/K`` boundary; the
    reference side is decided in rational arithmetic there.
    """
    rng = make_rng(seed)
    passed = 0
    for K in range(2, 11):
        m = instances // 9 + (K - 2 < instances % 9)
        alpha = rng.uniform(0.001, 0.5, size=m)
        P = rng.uniform(1e-6, 1.0, size=(m, K))
        edge = rng.random(m) < 0.3
        P[edge, rng.integers(K, size=edge.sum())] = alpha[edge] / K
        g = merge_p_values_batch(GammaVote((K - 1) / K), P, alpha)
        pmin = P.min(axis=1)
        ref = K * pmin > alpha
        for i in np.flatnonzero(np.abs(K * pmin - alpha) <= 8 * np.spacing(alpha)):
            ref[i] = K * Fraction(float(pmin[i])) > Fraction(float(alpha[i]))
        passed += int(np.count_nonzero((g > alpha) == ref))
    return int(passed), instances


def _brute_quantile(scores, ratios, w0, level: Fraction):
    """Exact rational quantile of the weighted score law with a mass at +inf."""
    total = sum(ratios, Fraction(0)) + w0
    acc = Fraction(0)
    for s in sorted(set(scores)):
        acc += sum((w for si, w in zip(scores, ratios) if si == s), Fraction(0)) / total
        if acc >= level:
            return s
    return math.inf


def quantile_oracle_suite(instances: int = 500, seed: int = 5):
    """Float quantiles agree with exact rational arithmetic on dyadic weights."""
    rng = make_rng(seed)
    passed = 0
    for _ in range(instances):
        n = int(rng.integers(1, 15))
        scores = [float(v) for v in rng.integers(0, 6, size=n)]
        # dyadic weights and levels keep the float sums exact
        ratios = [Fraction(int(v), 8) for v in rng.integers(0, 9, size=n)]
        w0 = Fraction(int(rng.integers(1, 9)), 8)
        level = Fraction(int(rng.integers(1, 64)), 64)
        want = _brute_quantile(scores, ratios, w0, level)
        cal = CalibrationScores(scores, [float(r) for r in ratios])
        got = wcp_threshold(cal, float(w0), float(1 - level))
        passed += got == want
    return int(passed), instances


def relative_gradient_error(fn, params, h: float = 1e-5) -> float:
    """``|g - fd| / max(|g|, |fd|)`` with central differences."""
    _, g = fn(params)
    fd = np.empty_like(params)
    for i in range(params.size):
        e = np.zeros_like(params)
        e[i] = h
        fd[i] = (fn(params + e)[0] - fn(params - e)[0]) / (2 * h)
    scale = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
    return float(np.linalg.norm(g - fd) / scale)


def gradient_suite(points: int = 10, seed: int = 6, tol: float = 1e-6):
    rng = make_rng(seed)
    passed = total = 0
    F = rng.normal(size=(40, 3))
    y = (rng.random(40) < 0.4).astype(float)
    for _ in range(points):
        params = rng.normal(size=4)
        passed += relative_gradient_error(lambda p: logistic_loss_and_grad(p, F, y, 1e-4), params) <= tol
        total += 1
    X = rng.normal(size=(40, 3))
    labels = rng.integers(0, 4, size=40)
    for _ in range(points):
        params = rng.normal(size=4 * 4)
        passed += relative_gradient_error(lambda p: softmax_loss_and_grad(p, X, labels, 4, 1e-4), params) <= tol
        total += 1
    return int(passed), total


def tv_suite():
    checks = [tv_lower_bound(1) == 0.5, tv_lower_bound(2) == 0.625, tv_lower_bound(50) > 0.9]
    vals = [tv_lower_bound(n) for n in range(1, 65)]
    checks.append(all(b > a for a, b in zip(vals, vals[1:])))
    checks.extend(abs(tv_lower_bound(n) - float(tv_lower_bound_exact(n))) <= 1e-14 for n in (3, 10, 40, 64))
    return int(sum(checks)), len(checks)


def change_of_measure_suite(draws: int = 10_000, seed: int = 7):
    """``E_P[w] = 1`` within three standard errors for each oracle ratio."""
    rng = make_rng(seed)
    cases = [
        (OracleGaussian([mu], 9.0, [0.0], 9.0), lambda m, mu=mu: mu + 3.0 * rng.standard_normal((m, 1)))
        for mu in (0.0, 2.0, 4.0)
    ]
    cases.append((OracleGaussian([0.5, -0.5], 1.0, [0.0, 0.0], 0.5), lambda m: np.array([0.5, -0.5]) + rng.standard_normal((m, 2))))
    centers = np.array([[2.0, 0.0], [0.0, 2.0]])
    src, tgt = np.array([0.7, 0.3]), np.array([0.4, 0.6])

    def mixture(m):
        comp = rng.choice(2, size=m, p=src)
        return centers[comp] + rng.standard_normal((m, 2))

    cases.append((GaussianMixtureRatio(centers, 1.0, src, tgt), mixture))
    passed = 0
    for ratio, sampler in cases:
        w = ratio(sampler(draws))
        se = w.std(ddof=1) / math.sqrt(draws)
        passed += abs(w.mean() - 1.0) <= 3 * se
    return int(passed), len(cases)


SUITES = {
    "duality": duality_suite,
    "split_conformal": split_conformal_suite,
    "bonferroni": bonferroni_suite,
    "kmin": kmin_suite,
    "quantile_oracle": quantile_oracle_suite,
    "gradients": gradient_suite,
    "tv": tv_suite,
    "change_of_measure": change_of_measure_suite,
}


def run_validate(pvalue_fn=weighted_p_value, echo=print) -> bool:
    """Run every suite, print per-suite counts and return overall success."""
    ok = True
    for name, suite in SUITES.items():
        passed, total = suite(pvalue_fn) if name == "duality" else suite()
        status = "ok" if passed == total else "FAIL"
        ok &= passed == total
        if echo is not None:
            echo(f"{name:18s} {passed:6d}/{total:<6d} {status}")
    return ok
