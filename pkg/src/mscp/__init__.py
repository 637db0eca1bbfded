"""Weighted conformal prediction with multiple covariate-shifted sources."""

from .core import DomainDataset, FeatureMap, Split, UnlabeledAccessError, score_abs_residual, score_one_minus_prob, split_dataset
from .merge import BonferroniMin, GammaVote, TwiceMean, intersect_intervals, merge_p_values, merged_set_from_pvalues, merged_set_vote
from .pool import MixtureRatio, MixtureWeights, adjusted_beta, estimate_tau, hierarchical_pooled_set, pool_calibration, pooled_wcp_set, tv_lower_bound
from .wcp import CalibrationScores, IntervalUnion, LabelSet, RegressionInterval, weighted_p_value, wcp_set, wcp_threshold
from .weighted_quantile import DegenerateWeightsError, WeightedScoreDistribution, weighted_quantile

__version__ = "0.1.0"
