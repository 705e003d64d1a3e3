"""Best-arm identification for moment-constrained arm classes."""

from .moment_class import MomentClass, feasible_mean_interval, membership_margin, dual_constraint_min
from .distributions import (DiscreteDistribution, RngStream, Pareto, Bernoulli, UniformDiscrete,
                            PointMass, TruncatedNormal, arm_from_config, empirical_push,
                            kl_discrete, right_dense_witness)
from .klinf import DualPair, KlinfResult, klinf, klinf_upper, klinf_bounded, primal_reconstruct

__all__ = [
    "MomentClass", "feasible_mean_interval", "membership_margin", "dual_constraint_min",
    "DiscreteDistribution", "RngStream", "Pareto", "Bernoulli", "UniformDiscrete", "PointMass",
    "TruncatedNormal", "arm_from_config", "empirical_push", "kl_discrete", "right_dense_witness",
    "DualPair", "KlinfResult", "klinf", "klinf_upper", "klinf_bounded", "primal_reconstruct",
]
