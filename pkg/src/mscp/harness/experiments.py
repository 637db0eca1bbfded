"""Replication loops for the one-dimensional shift study, multi-source
regression, latent classification and hierarchical pooling.

Every replication draws its randomness from keys ``(seed, grid index,
replication, ...)``, so replications are independent of execution order and
can run on a process pool.
"""

from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import datagen
from ..core import split_dataset
from ..merge import merge_p_values, merge_p_values_batch, merged_set_from_pvalues, merged_set_vote
from ..models import fit_kernel_ridge, fit_softmax
from ..pool import (
    MixtureRatio,
    adjusted_beta,
    beta_floor,
    estimate_tau,
    fit_mixture_logistic_ratio,
    hierarchical_pooled_set,
    partition_hierarchical,
    pool_calibration,
)
from ..ratio import balanced_target_subsample, fit_logistic_ratio
from ..wcp import AbsResidualScore, CalibrationScores, IntervalUnion, OneMinusProbScore, RegressionInterval, weighted_p_values, wcp_set
from .config import ConfigError, ExperimentConfig

log = logging.getLogger(__name__)


def _ones(X):
    return np.ones(np.atleast_2d(X).shape[0])


def int_seed(*keys) -> int:
    """Derive a 63-bit integer seed from replication keys."""
    return int(datagen.make_rng(*keys).integers(2**63 - 1))


def worker_count() -> int:
    raw = os.environ.get("MSCP_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MSCP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("MSCP_THREADS must be >= 1")
    return n


# ---------------------------------------------------------------------------
# outcomes and reports


@dataclass(frozen=True)
class Outcome:
    """One method's result on one replication."""

    covered: bool
    finite: bool
    size: float  # interval length, or label count for classification
    seconds: float = 0.0


@dataclass(frozen=True)
class MetricsRow:
    task: str
    method: str
    grid_key: str
    alpha: float
    replications: int
    mcp: float
    pfi: float
    medl_or_size: float
    runtime_seconds: float
    cond_coverage: float = float("nan")  # coverage among finite sets
    grid: tuple = ()


@dataclass
class MetricsReport:
    task: str
    alpha: float
    rows: list[MetricsRow] = field(default_factory=list)

    def row(self, method: str, **grid) -> MetricsRow:
        want = set(grid.items())
        hits = [r for r in self.rows if r.method == method and want <= set(r.grid)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {method} {grid}")
        return hits[0]

    @property
    def methods(self) -> list[str]:
        return list(dict.fromkeys(r.method for r in self.rows))


def grid_key(grid) -> str:
    return ";".join(f"{k}={v}" for k, v in grid)


def aggregate(outcomes, task: str, method: str, grid, alpha: float, report_runtime: bool) -> MetricsRow:
    """Order-independent summary: integer counts, a sorted median and a sum."""
    R = len(outcomes)
    covered = sum(int(o.covered) for o in outcomes)
    finite = [o for o in outcomes if o.finite]
    if task == "classification":
        size = sum(o.size for o in outcomes) / R
    else:
        lengths = sorted(o.size for o in finite)
        size = float(np.median(lengths)) if lengths else float("inf")
    cond = sum(int(o.covered) for o in finite) / len(finite) if finite else float("nan")
    runtime = float(sum(sorted(o.seconds for o in outcomes))) if report_runtime else 0.0
    return MetricsRow(task, method, grid_key(grid), alpha, R, covered / R, len(finite) / R, size, runtime, cond, tuple(grid))


def _run_grid(cfg: ExperimentConfig, grid_points, rep_fn) -> MetricsReport:
    """Run ``rep_fn(cfg, grid, g, r) -> {method: Outcome}`` over all grid points and replications."""
    report = MetricsReport(cfg.task, cfg.alpha)
    jobs = [(cfg, grid, g, r) for g, grid in enumerate(grid_points) for r in range(cfg.replications)]
    workers = min(worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(rep_fn, *zip(*jobs), chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        results = [rep_fn(*job) for job in jobs]
    for g, grid in enumerate(grid_points):
        chunk = results[g * cfg.replications : (g + 1) * cfg.replications]
        for m in cfg.parsed_methods:
            outs = [res[m.name] for res in chunk]
            report.rows.append(aggregate(outs, cfg.task, m.name, grid, cfg.alpha, cfg.report_runtime))
    return report


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def _outcome(pset, y, seconds: float) -> Outcome:
    if hasattr(pset, "members"):
        return Outcome(pset.contains(y), not pset.is_full, float(pset.size), seconds)
    return Outcome(pset.contains(y), pset.is_finite, pset.length if pset.is_finite else float("inf"), seconds)


# ---------------------------------------------------------------------------
# set construction shared by the multi-source tasks


def merged_pvalue_regression(rule, cals, test_ratios, prediction: float, alpha: float) -> RegressionInterval:
    """Exact merged-p-value interval for absolute residuals around one shared prediction.

    Each per-source p-value is nonincreasing in the residual ``s``, and every
    merging rule is nondecreasing in its inputs, so the kept residuals form
    ``[0, s*]`` with ``s*`` a calibration score, or everything when the merged
    p-value stays above ``alpha`` as ``s`` goes to infinity.
    """
    p_inf = [w0 / (c.ratios.sum() + w0) for c, w0 in zip(cals, test_ratios)]
    if merge_p_values(rule, p_inf, alpha) > alpha:
        return RegressionInterval(prediction, float("inf"), 1.0 - alpha)
    cand = np.unique(np.concatenate([[0.0]] + [c.scores for c in cals]))
    P = np.stack([weighted_p_values(c, w0, cand) for c, w0 in zip(cals, test_ratios)], axis=1)
    keep = merge_p_values_batch(rule, P, alpha) > alpha
    if not keep[0]:
        return IntervalUnion((), 1.0 - alpha)
    # monotone, so the kept candidates are a prefix
    radius = cand[np.flatnonzero(keep)[-1]]
    return RegressionInterval(prediction, float(radius), 1.0 - alpha)


def merged_pvalue_classification(rule, cals, test_ratios, probs, alpha: float):
    C = probs.size

    def pvalue_fn(c):
        s = 1.0 - probs[c]
        return [float(weighted_p_values(cal, w0, [s])[0]) for cal, w0 in zip(cals, test_ratios)]

    return merged_set_from_pvalues(rule, pvalue_fn, alpha, range(C), n_classes=C)


def _method_sets(cfg, K, scorer, cal_sets, source_ratios, pooled, pooled_ratio, x, y, feature_map, regression: bool):
    """Build every configured method's set at ``x`` and score it against ``y``."""
    alpha = cfg.alpha
    phi = feature_map if feature_map is not None else (lambda v: v)
    out = {}
    for m in cfg.parsed_methods:
        t0 = time.perf_counter()
        if m.kind == "CP":
            pset = wcp_set(pooled.X, pooled.y, _ones, scorer, x, alpha)
        elif m.kind == "PooledWCP":
            pset = wcp_set(pooled.X, pooled.y, pooled_ratio, scorer, x, alpha, feature_map)
        elif m.kind == "MergedVote":
            rule = m.vote_rule(K)
            a_k = rule.source_alpha(alpha)
            sets = [wcp_set(c.X, c.y, w, scorer, x, a_k, feature_map) for c, w in zip(cal_sets, source_ratios)]
            pset = merged_set_vote(sets, rule.gamma, K=K, alpha=alpha)
        else:
            rule = m.merging_rule(K)
            cals = [CalibrationScores(scorer.scores(c.X, c.y), w(phi(c.X))) for c, w in zip(cal_sets, source_ratios)]
            w0s = [float(np.ravel(w(phi(np.atleast_2d(x))))[0]) for w in source_ratios]
            if regression:
                pset = merged_pvalue_regression(rule, cals, w0s, scorer.prediction(x), alpha)
            else:
                pset = merged_pvalue_classification(rule, cals, w0s, scorer.probs(x), alpha)
        out[m.name] = _outcome(pset, y, time.perf_counter() - t0)
    return out


def _estimated_ratios(cfg, train_sets, target_X, pooled, keys, feature_map=None):
    """Per-source and pooled classifier ratios, each fit on training splits only.

    Each classifier sees an equally sized random subset of the unlabeled
    target sample. The pooled classifier draws sources in the calibration
    proportions, so its ratio is against the same mixture the pooled
    calibration set samples from.
    """
    phi = feature_map if feature_map is not None else (lambda v: v)
    opts = dict(epochs=cfg.logistic_epochs, learning_rate=cfg.logistic_learning_rate, features=cfg.logistic_features)
    T = phi(target_X)
    per_source = []
    for k, tr in enumerate(train_sets, start=1):
        sub = balanced_target_subsample(T, min(len(tr), len(T)), int_seed(*keys, 100 + k))
        per_source.append(fit_logistic_ratio(phi(tr.X), sub, seed=0, **opts))
    n_total = sum(len(tr) for tr in train_sets)
    sub = balanced_target_subsample(T, min(n_total, len(T)), int_seed(*keys, 99))
    pooled_w = fit_mixture_logistic_ratio([phi(tr.X) for tr in train_sets], pooled.proportions, sub, int_seed(*keys, 98), n_total=n_total, **opts)
    return per_source, pooled_w


# ---------------------------------------------------------------------------
# one-dimensional shift study


def figure1_grid(cfg: ExperimentConfig):
    return [(("mu", mu), ("n", n)) for n in cfg.n for mu in cfg.mu]


def figure1_replication(cfg: ExperimentConfig, grid, g: int, r: int) -> dict:
    mu, n = dict(grid)["mu"], dict(grid)["n"]
    keys = (cfg.seed, g, r)
    design = datagen.Figure1Design(float(mu), int(n))
    train = datagen.gen_figure1_sample(design, "source", cfg.train_size, (*keys, 0))
    model = fit_kernel_ridge(train.X, train.y)
    scorer = AbsResidualScore(model)
    cal = datagen.gen_figure1_sample(design, "source", design.n, (*keys, 1))
    test = datagen.gen_figure1_sample(design, "target", 1, (*keys, 2))
    if cfg.ratio_mode == "oracle":
        ratio = design.ratio()
    else:
        target = datagen.gen_figure1_sample(design, "target", cfg.train_size, (*keys, 3), labeled=False)
        ratio = fit_logistic_ratio(train.X, target.X, epochs=cfg.logistic_epochs, learning_rate=cfg.logistic_learning_rate, features=cfg.logistic_features)
    x, y = test.X[0], float(test.y[0])
    out = {}
    for m in cfg.parsed_methods:
        pset, dt = _timed(wcp_set, cal.X, cal.y, ratio if m.kind == "WCP" else _ones, scorer, x, cfg.alpha)
        out[m.name] = _outcome(pset, y, dt)
    return out


def run_figure1(cfg: ExperimentConfig) -> MetricsReport:
    if cfg.task != "figure1":
        raise ConfigError("run_figure1 needs task = figure1")
    return _run_grid(cfg, figure1_grid(cfg), figure1_replication)


# ---------------------------------------------------------------------------
# multi-source regression


def regression_grid(cfg: ExperimentConfig):
    return [(("sigma_h_sq", s), ("K", K), ("d", d)) for s, K, d in itertools.product(cfg.sigma_h_sq, cfg.K, cfg.d)]


def _regression_design(cfg, sigma_h_sq, K, d, keys) -> datagen.RegressionDesign:
    mu, sigma = datagen.sample_domain_params(d, K, (*keys, 0))
    if cfg.identical_sources:
        mu, sigma = np.repeat(mu[:1], K, axis=0), np.repeat(sigma[:1], K)
    return datagen.RegressionDesign(d, K, float(sigma_h_sq), mu, sigma)


def regression_replication(cfg: ExperimentConfig, grid, g: int, r: int) -> dict:
    p = dict(grid)
    K, d = int(p["K"]), int(p["d"])
    keys = (cfg.seed, g, r)
    design = _regression_design(cfg, p["sigma_h_sq"], K, d, keys)
    sizes = list(cfg.source_sizes) if cfg.source_sizes is not None else datagen.source_sizes(d, K)

    train_sets, cal_sets = [], []
    for k in range(1, K + 1):
        data = datagen.gen_regression_sample(design, k, sizes[k - 1], (*keys, k))
        tr, cal = split_dataset(data, 0.5, int_seed(*keys, 200 + k))
        train_sets.append(tr)
        cal_sets.append(cal)
    target = datagen.gen_regression_sample(design, datagen.TARGET, sum(sizes) // 2, (*keys, K + 1), labeled=False)
    test = datagen.gen_regression_sample(design, datagen.TARGET, 1, (*keys, K + 2))

    model = fit_kernel_ridge(np.vstack([t.X for t in train_sets]), np.concatenate([t.y for t in train_sets]))
    scorer = AbsResidualScore(model)
    pooled = pool_calibration(cal_sets, int_seed(*keys, 300))

    if cfg.ratio_mode == "oracle":
        source_ratios = design.source_ratios()
        pooled_ratio = MixtureRatio(source_ratios, pooled.proportions)
    else:
        source_ratios, pooled_ratio = _estimated_ratios(cfg, train_sets, target.X, pooled, keys)
    return _method_sets(cfg, K, scorer, cal_sets, source_ratios, pooled, pooled_ratio, test.X[0], float(test.y[0]), None, True)


def run_regression(cfg: ExperimentConfig) -> MetricsReport:
    if cfg.task != "regression":
        raise ConfigError("run_regression needs task = regression")
    return _run_grid(cfg, regression_grid(cfg), regression_replication)


# ---------------------------------------------------------------------------
# latent classification


def classification_grid(cfg: ExperimentConfig):
    return [(("K", K), ("C", C), ("separation", s)) for K, C, s in itertools.product(cfg.K, cfg.C, cfg.separation)]


def classification_replication(cfg: ExperimentConfig, grid, g: int, r: int) -> dict:
    p = dict(grid)
    K, C = int(p["K"]), int(p["C"])
    keys = (cfg.seed, g, r)
    design = datagen.make_classification_design(K, C, float(p["separation"]), (*keys, 0), shift=cfg.shift)
    phi = design.feature_map

    train_sets, cal_sets = [], []
    for k in range(1, K + 1):
        data = datagen.gen_classification_sample(design, k, cfg.m_per_domain, (*keys, k))
        tr, cal = split_dataset(data, 0.5, int_seed(*keys, 200 + k))
        train_sets.append(tr)
        cal_sets.append(cal)
    target = datagen.gen_classification_sample(design, datagen.TARGET, K * cfg.m_per_domain // 2, (*keys, K + 1), labeled=False)
    test = datagen.gen_classification_sample(design, datagen.TARGET, 1, (*keys, K + 2))

    model = fit_softmax(phi(np.vstack([t.X for t in train_sets])), np.concatenate([t.y for t in train_sets]), C)
    scorer = OneMinusProbScore(lambda X: model.predict_proba(phi(X)))
    pooled = pool_calibration(cal_sets, int_seed(*keys, 300))

    if cfg.ratio_mode == "oracle":
        source_ratios = design.source_ratios()
        pooled_ratio = MixtureRatio(source_ratios, pooled.proportions)
    else:
        source_ratios, pooled_ratio = _estimated_ratios(cfg, train_sets, target.X, pooled, keys, phi)
    return _method_sets(cfg, K, scorer, cal_sets, source_ratios, pooled, pooled_ratio, test.X[0], int(test.y[0]), phi, False)


def run_classification(cfg: ExperimentConfig) -> MetricsReport:
    if cfg.task != "classification":
        raise ConfigError("run_classification needs task = classification")
    return _run_grid(cfg, classification_grid(cfg), classification_replication)


# ---------------------------------------------------------------------------
# hierarchical pooling


@dataclass(frozen=True)
class HierarchicalResult:
    coverage: float
    replications: int
    betas: np.ndarray  # (R, K)
    floor: float


def hierarchical_replication(design, tau, N2: int, alpha: float, train_size: int, keys):
    """One draw of the domain-then-sample model; returns ``(covered, beta)``."""
    K = design.K
    ids_tr, X_tr, y_tr = datagen.gen_hierarchical(design, tau, train_size, (*keys, 0))
    scorer = AbsResidualScore(fit_kernel_ridge(X_tr, y_tr))
    ids, X, y = datagen.gen_hierarchical(design, tau, 2 * N2, (*keys, 1))
    X1, y1, k2 = partition_hierarchical(ids, X, y, int_seed(*keys, 2))
    beta = adjusted_beta(estimate_tau(k2, K), len(k2))
    test = datagen.gen_regression_sample(design, datagen.TARGET, 1, (*keys, 3))
    pset = hierarchical_pooled_set(X1, y1, beta, design.source_ratios(), scorer, test.X[0], alpha)
    return pset.contains(float(test.y[0])), np.asarray(beta.values)


def run_hierarchical(K: int = 5, tau=(0.1, 0.15, 0.2, 0.25, 0.3), N2: int = 2000, replications: int = 2000, alpha: float = 0.1, seed: int = 0, d: int = 2, sigma_h_sq: float = 4.0, train_size: int = 200) -> HierarchicalResult:
    """Coverage of hierarchical pooled WCP with oracle component ratios.

    Each replication draws ``2 * N2`` points; half calibrate, the other half
    only contribute their domain indices to the mixture-weight estimate.
    """
    covered = 0
    betas = np.empty((replications, K))
    for r in range(replications):
        keys = (seed, 0, r)
        design = datagen.make_regression_design(d, K, sigma_h_sq, (*keys, 9))
        hit, betas[r] = hierarchical_replication(design, tau, N2, alpha, train_size, keys)
        covered += int(hit)
    return HierarchicalResult(covered / replications, replications, betas, beta_floor(K, N2))


RUNNERS = {"figure1": run_figure1, "regression": run_regression, "classification": run_classification}


def run_experiment(cfg: ExperimentConfig) -> MetricsReport:
    return RUNNERS[cfg.task](cfg)


__all__ = [
    "MetricsReport",
    "MetricsRow",
    "Outcome",
    "HierarchicalResult",
    "run_classification",
    "run_experiment",
    "run_figure1",
    "run_hierarchical",
    "run_regression",
]
