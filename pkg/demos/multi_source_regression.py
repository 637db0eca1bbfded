"""Walk through the four set constructions on one synthetic regression draw.

Five shifted Gaussian sources, one unlabeled target, oracle density ratios.
Run with ``python demos/multi_source_regression.py``.
"""

import numpy as np

from mscp import (
    GammaVote,
    MixtureRatio,
    adjusted_beta,
    estimate_tau,
    hierarchical_pooled_set,
    merged_set_vote,
    pool_calibration,
    pooled_wcp_set,
)
from mscp.core import split_dataset
from mscp.datagen import TARGET, gen_hierarchical, gen_regression_sample, make_regression_design, source_sizes
from mscp.models import fit_kernel_ridge
from mscp.wcp import AbsResidualScore, wcp_set

ALPHA = 0.1
design = make_regression_design(d=2, K=5, sigma_h_sq=4.0, seed=1)
sources = [gen_regression_sample(design, k, m, seed=(1, k)) for k, m in enumerate(source_sizes(2, 5), start=1)]
splits = [split_dataset(s, 0.5, seed=20 + s.domain_id) for s in sources]  # (train, calibration)
train_X = np.vstack([sp[0].X for sp in splits])
train_y = np.concatenate([sp[0].y for sp in splits])
scorer = AbsResidualScore(fit_kernel_ridge(train_X, train_y))

test = gen_regression_sample(design, TARGET, 1, seed=3)
x, y = test.X[0], float(test.y[0])
print(f"test point x={np.round(x, 3)} y={y:.3f} prediction={scorer.prediction(x):.3f}")

# one weighted set per source; the gamma vote runs each at a stricter level
ratios = design.source_ratios()
for gamma in (0.5, 0.8):
    rule = GammaVote(gamma)
    per_source = [wcp_set(sp[1].X, sp[1].y, ratios[k], scorer, x, rule.source_alpha(ALPHA)) for k, sp in enumerate(splits)]
    merged = merged_set_vote(per_source, gamma, alpha=ALPHA)
    print(f"vote gamma={gamma}: per-source radii {[round(s.radius, 2) for s in per_source]} -> {merged.intervals()}")

# pooling: ratio against the size-weighted mixture of source laws
pooled = pool_calibration([sp[1] for sp in splits], seed=4)
mixture = MixtureRatio(ratios, pooled.proportions)
print("pooled:", pooled_wcp_set(pooled, mixture, scorer, x, ALPHA))

# hierarchical pooling: estimate domain frequencies from held-out indices
tau = (0.1, 0.15, 0.2, 0.25, 0.3)
ids, X, yy = gen_hierarchical(design, tau, 4000, seed=5)
beta = adjusted_beta(estimate_tau(ids[2000:], 5), 2000)
print("estimated beta:", np.round(beta.values, 3))
print("hierarchical:", hierarchical_pooled_set(X[:2000], yy[:2000], beta, ratios, scorer, x, ALPHA))
