"""Pooled weighted conformal prediction across sources, plain and hierarchical."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np
from scipy.special import logsumexp

from .core import DomainDataset
from .wcp import wcp_set


class OutOfSupportError(ValueError):
    """A query point lies outside the support of every source component."""


@dataclass(frozen=True, eq=False)
class PooledCalibration:
    """Calibration samples from all sources, concatenated and uniformly permuted."""

    X: np.ndarray
    y: np.ndarray
    source_ids: np.ndarray
    source_sizes: tuple[int, ...]
    permutation_seed: int

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def proportions(self) -> np.ndarray:
        sizes = np.asarray(self.source_sizes, dtype=float)
        return sizes / sizes.sum()


def pool_calibration(cal_sets, seed: int) -> PooledCalibration:
    cal_sets = list(cal_sets)
    if not cal_sets:
        raise ValueError("need at least one calibration set")
    if any(len(s) == 0 for s in cal_sets):
        raise ValueError("calibration sets must be nonempty")
    X = np.vstack([s.X for s in cal_sets])
    y = np.concatenate([s.y for s in cal_sets])
    ids = np.concatenate([np.full(len(s), s.domain_id) for s in cal_sets])
    perm = np.random.default_rng(seed).permutation(X.shape[0])
    return PooledCalibration(X[perm], y[perm], ids[perm], tuple(len(s) for s in cal_sets), seed)


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1 or np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must be a nonnegative simplex, got {v}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]


class MixtureRatio:
    """Ratio of the target law to a mixture of source laws.

    Given per-source ratios ``w_k = dQ/dP_k`` and mixture weights ``lam``,
    ``dQ / d(sum lam_k P_k) = 1 / sum_k lam_k / w_k``. Sources with
    ``w_k = 0`` drive the result to 0; ``w_k = inf`` terms drop out.
    """

    def __init__(self, component_ratios, weights: MixtureWeights):
        self.components = list(component_ratios)
        self.weights = weights if isinstance(weights, MixtureWeights) else MixtureWeights(weights)
        if len(self.components) != len(self.weights):
            raise ValueError("one mixture weight per component ratio is required")

    def _log_components(self, z):
        cols = []
        for comp in self.components:
            if hasattr(comp, "log_ratio"):
                cols.append(comp.log_ratio(z))
            else:
                w = np.asarray(comp(z), dtype=float)
                if np.any(w < 0):
                    raise ValueError("component ratios must be nonnegative")
                with np.errstate(divide="ignore"):
                    cols.append(np.log(w))
        single = np.ndim(cols[0]) == 0
        return np.stack([np.atleast_1d(c) for c in cols], axis=1), single

    def log_ratio(self, z):
        logw, single = self._log_components(z)
        lam = self.weights.values
        active = lam > 0
        if np.any(np.all(np.isposinf(logw[:, active]), axis=1)):
            raise OutOfSupportError("query point lies outside every source support")
        # log of sum_k lam_k * exp(-log w_k); -inf log-ratios give +inf terms
        with np.errstate(over="ignore", invalid="ignore"):
            log_denom = logsumexp(-logw[:, active], axis=1, b=lam[active])
        out = -log_denom
        return float(out[0]) if single else out

    def __call__(self, z):
        return np.exp(self.log_ratio(z))


def mixture_ratio_from_components(component_ratios, weights) -> MixtureRatio:
    return MixtureRatio(component_ratios, weights)


def pooled_wcp_set(pooled: PooledCalibration, mixture_ratio, scorer, x, alpha: float, feature_map=None):
    """WCP set at ``x`` over pooled calibration data weighted by the mixture ratio."""
    if len(pooled) == 0:
        raise ValueError("pooled calibration set is empty")
    return wcp_set(pooled.X, pooled.y, mixture_ratio, scorer, x, alpha, feature_map)


# ---------------------------------------------------------------------------
# hierarchical pooling


def estimate_tau(domain_indices, K: int) -> MixtureWeights:
    """Empirical domain frequencies ``count(k) / N2`` for ``k = 1..K``."""
    idx = np.asarray(domain_indices, dtype=int).ravel()
    if idx.size == 0:
        raise ValueError("need at least one domain index")
    if idx.min() < 1 or idx.max() > K:
        raise ValueError(f"domain indices must lie in [1, {K}]")
    counts = np.bincount(idx - 1, minlength=K)
    return MixtureWeights(counts / idx.size)


def adjusted_beta(tau_hat: MixtureWeights, N2: int) -> MixtureWeights:
    """Floor each weight at ``1/N2`` and renormalize."""
    if N2 < 1:
        raise ValueError("N2 must be >= 1")
    floored = np.maximum(np.asarray(tau_hat.values, dtype=float), 1.0 / N2)
    return MixtureWeights(floored / floored.sum())


def beta_floor(K: int, N2: int) -> float:
    """Lower bound ``eps / (1 + K eps)`` on every adjusted weight, ``eps = 1/N2``."""
    eps = 1.0 / N2
    return eps / (1.0 + K * eps)


def partition_hierarchical(domain_ids, X, y, seed: int, first_fraction: float = 0.5):
    """Randomly split hierarchical draws into calibration data and domain indices.

    Returns ``(X1, y1, k2)``: the first part keeps only ``(X, y)``, the second
    only its domain indices.
    """
    domain_ids = np.asarray(domain_ids)
    n = domain_ids.size
    if n < 2:
        raise ValueError("need at least two draws to partition")
    n1 = int(np.floor(first_fraction * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    first, second = perm[:n1], perm[n1:]
    return np.asarray(X)[first], np.asarray(y)[first], domain_ids[second]


def hierarchical_pooled_set(D1_X, D1_y, beta: MixtureWeights, component_ratios, scorer, x, alpha: float, feature_map=None):
    """WCP set over domain-agnostic calibration data using the adjusted ratio.

    The adjusted ratio is the mixture ratio of ``component_ratios`` with the
    clipped weights ``beta``.
    """
    if len(D1_X) == 0:
        raise ValueError("calibration part of the hierarchical split is empty")
    ratio = MixtureRatio(component_ratios, beta)
    return wcp_set(D1_X, D1_y, ratio, scorer, x, alpha, feature_map)


# ---------------------------------------------------------------------------
# total-variation diagnostic


def tv_lower_bound(n: int) -> float:
    """``1 - C(2n, n) / 4**n``: TV gap between fixed-count and i.i.d. mixture draws.

    Uses ``C(2n, n) / 4**n = prod_{j<=n} (2j - 1) / (2j)``, which never overflows.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    j = np.arange(1, n + 1, dtype=float)
    return float(1.0 - np.prod((2 * j - 1) / (2 * j)))


def tv_lower_bound_exact(n: int) -> Fraction:
    return 1 - Fraction(comb(2 * n, n), 4**n)


def fit_mixture_logistic_ratio(source_sets, proportions, target_X, seed: int, n_total: int | None = None, **fit_kwargs):
    """Classifier-based mixture ratio: sample sources in ``proportions``, fit source-vs-target.

    Each source contributes ``round(p_k * n_total)`` rows drawn without
    replacement when it has enough rows and with replacement otherwise.
    """
    from .ratio import fit_logistic_ratio

    sets = [s.X if isinstance(s, DomainDataset) else np.asarray(s, dtype=float) for s in source_sets]
    p = np.asarray(proportions.values if isinstance(proportions, MixtureWeights) else proportions, dtype=float)
    if n_total is None:
        n_total = sum(len(s) for s in sets)
    rng = np.random.default_rng(seed)
    parts = []
    for Xk, pk in zip(sets, p):
        m = int(np.floor(pk * n_total + 0.5))
        if m == 0:
            continue
        idx = rng.choice(len(Xk), size=m, replace=m > len(Xk))
        parts.append(Xk[idx])
    return fit_logistic_ratio(np.vstack(parts), target_X, seed=seed, **fit_kwargs)
