"""How shrinking source/target overlap makes weighted intervals uninformative.

Runs a small version of the one-source shift experiment through the harness
and prints the finite-interval rate per shift. Run with
``python demos/overlap_and_finiteness.py``.
"""

from mscp.harness.config import ExperimentConfig
from mscp.harness.experiments import run_experiment

cfg = ExperimentConfig.from_dict(dict(task="figure1", methods=["CP", "WCP"], replications=300, mu=[0, 2, 4, 6], n=[10, 50], seed=5))
report = run_experiment(cfg)
print(f"{'method':6s} {'grid':12s} {'coverage':>9s} {'finite':>7s} {'cov|finite':>11s}")
for r in report.rows:
    print(f"{r.method:6s} {r.grid_key:12s} {r.mcp:9.3f} {r.pfi:7.3f} {r.cond_coverage:11.3f}")
