"""One test per acceptance criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from mscp.harness.config import ExperimentConfig
from mscp.harness.experiments import run_experiment, run_hierarchical
from mscp.harness.validate import (
    bonferroni_suite,
    change_of_measure_suite,
    duality_suite,
    gradient_suite,
    kmin_suite,
    split_conformal_suite,
    tv_suite,
)

ALPHA = 0.1


def _verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _se(p, R):
    return math.sqrt(max(p * (1 - p), 1e-12) / R)


def test_01_duality(capsys):
    (passed, total), secs = _timed(duality_suite, instances=1000)
    _verdict(capsys, 1, passed == total == 1000 and secs < 1, f"{passed}/{total} in {secs:.2f}s")


def test_02_split_conformal_reduction(capsys):
    (passed, total), secs = _timed(split_conformal_suite)
    _verdict(capsys, 2, passed == total == 150 and secs < 1, f"{passed}/{total} in {secs:.2f}s")


def test_03_bonferroni_identity(capsys):
    (passed, total), secs = _timed(bonferroni_suite, instances=200)
    _verdict(capsys, 3, passed == total == 200 and secs < 5, f"{passed}/{total} in {secs:.2f}s")


def test_04_kmin_equivalence(capsys):
    (passed, total), secs = _timed(kmin_suite, instances=100_000)
    _verdict(capsys, 4, passed == total == 100_000 and secs < 1, f"{passed}/{total} in {secs:.2f}s")


@pytest.mark.slow
def test_05_figure1(capsys):
    cfg = ExperimentConfig.from_json("configs/figure1.json")
    assert cfg.ratio_mode == "oracle" and cfg.replications == 2000 and cfg.alpha == ALPHA
    assert cfg.mu == (0, 2, 4, 6) and cfg.n == (10, 50)
    rep, secs = _timed(run_experiment, cfg)
    R = cfg.replications
    problems = []
    for n in cfg.n:
        rows = [rep.row("WCP", mu=mu, n=n) for mu in cfg.mu]
        for row in rows:
            if row.mcp < 0.88:
                problems.append(f"MCP {row.mcp:.3f} at {row.grid_key}")
        if rows[0].pfi < 0.99:
            problems.append(f"PFI {rows[0].pfi:.3f} at mu=0 n={n}")
        for a, b in zip(rows, rows[1:]):
            if b.pfi > a.pfi + 2 * math.hypot(_se(a.pfi, R), _se(b.pfi, R)):
                problems.append(f"PFI rises {a.grid_key} -> {b.grid_key}")
    p0, p6 = rep.row("WCP", mu=0, n=10), rep.row("WCP", mu=6, n=10)
    if p6.pfi > p0.pfi - 0.10:
        problems.append(f"PFI drop {p0.pfi:.3f} -> {p6.pfi:.3f} under 0.10")
    if not p6.cond_coverage < 0.90:
        problems.append(f"conditional coverage {p6.cond_coverage:.3f} at mu=6 n=10")
    if secs >= 120:
        problems.append(f"runtime {secs:.1f}s")
    table = " ".join(f"[{r.grid_key} mcp={r.mcp:.3f} pfi={r.pfi:.3f} cond={r.cond_coverage:.3f}]" for r in rep.rows)
    _verdict(capsys, 5, not problems, f"{'; '.join(problems) or 'ok'} in {secs:.1f}s {table}")


@pytest.mark.slow
def test_06_regression_row(capsys):
    cfg = ExperimentConfig.from_json("configs/regression.json")
    assert cfg.ratio_mode == "logistic" and cfg.replications == 300
    assert cfg.sigma_h_sq == (4.0,) and cfg.K == (5,) and cfg.d == (2,)
    rep, secs = _timed(run_experiment, cfg)
    cp, pooled, mv = rep.row("CP"), rep.row("PooledWCP"), rep.row("MergedVote(1/2)")
    checks = {
        "CP mcp <= .895": cp.mcp <= 0.895,
        "Pooled mcp in [.87,.94]": 0.87 <= pooled.mcp <= 0.94,
        "MV(1/2) mcp >= Pooled": mv.mcp >= pooled.mcp,
        "MedL MV(1/2) > Pooled > CP": mv.medl_or_size > pooled.medl_or_size > cp.medl_or_size,
        "runtime < 600s": secs < 600,
    }
    failed = [k for k, v in checks.items() if not v]
    table = " ".join(f"[{r.method} mcp={r.mcp:.3f} medl={r.medl_or_size:.2f} pfi={r.pfi:.3f}]" for r in rep.rows)
    _verdict(capsys, 6, not failed, f"{', '.join(failed) or 'ok'} in {secs:.1f}s {table}")


@pytest.mark.slow
def test_07_identical_sources(capsys):
    cfg = ExperimentConfig.from_dict(
        dict(task="regression", methods=["PooledWCP"], K=3, d=2, sigma_h_sq=4.0, source_sizes=[100, 100, 100],
             identical_sources=True, ratio_mode="oracle", replications=2000, seed=7)
    )
    rep, secs = _timed(run_experiment, cfg)
    mcp = rep.row("PooledWCP").mcp
    bound = 1 - ALPHA - 3 * _se(1 - ALPHA, cfg.replications)
    _verdict(capsys, 7, mcp >= bound and secs < 60, f"MCP {mcp:.4f} vs {bound:.4f} in {secs:.1f}s")


@pytest.mark.slow
def test_08_hierarchical(capsys):
    tau = (0.1, 0.15, 0.2, 0.25, 0.3)
    res, secs = _timed(run_hierarchical, K=5, tau=tau, N2=2000, replications=2000, alpha=ALPHA, seed=11)
    sums_ok = bool(np.all(np.abs(res.betas.sum(axis=1) - 1.0) <= 1e-12))
    floor_ok = bool(np.all(res.betas >= res.floor))
    ok = res.coverage >= 1 - ALPHA - 0.05 and sums_ok and floor_ok and secs < 120
    _verdict(capsys, 8, ok, f"coverage {res.coverage:.4f}, beta sums ok={sums_ok}, floor ok={floor_ok} in {secs:.1f}s")


def test_09_tv(capsys):
    (passed, total), secs = _timed(tv_suite)
    _verdict(capsys, 9, passed == total and secs < 1, f"{passed}/{total} in {secs:.3f}s")


def test_10_numerical_checks(capsys):
    (gp, gt), s1 = _timed(gradient_suite, points=10, tol=1e-6)
    (cp, ct), s2 = _timed(change_of_measure_suite, draws=10_000)
    ok = gp == gt == 20 and cp == ct and s1 + s2 < 10
    _verdict(capsys, 10, ok, f"gradients {gp}/{gt}, change of measure {cp}/{ct} in {s1 + s2:.2f}s")
