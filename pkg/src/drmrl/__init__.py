"""Risk-sensitive episodic tabular RL under Lipschitz dynamic risk measures."""

from .agents import OVI_DRM, UCBVI_DRM, AgentConfig, LearnerState, RegretCurve, om, optimism_rate, run_algorithm
from .distributions import Cdf, DiscreteDistribution, make_dist, sup_distance, to_cdf, wasserstein_distance
from .mdp import Policy, TabularMDP, gen_experiment_mdp, gen_gap_hard_instance, gen_tree_hard_instance, rollout
from .planning import compute_gaps, drm_policy_evaluation, drm_value_iteration
from .risk import CVaR, ERM, OCE, Distortion, Mean, RiskSchedule, Spectral, build_schedule, evaluate

__all__ = [
    "AgentConfig", "CVaR", "Cdf", "DiscreteDistribution", "Distortion", "ERM", "LearnerState",
    "Mean", "OCE", "OVI_DRM", "Policy", "RegretCurve", "RiskSchedule", "Spectral", "TabularMDP",
    "UCBVI_DRM", "build_schedule", "compute_gaps", "drm_policy_evaluation", "drm_value_iteration",
    "evaluate", "gen_experiment_mdp", "gen_gap_hard_instance", "gen_tree_hard_instance",
    "make_dist", "om", "optimism_rate", "rollout", "run_algorithm", "sup_distance", "to_cdf",
    "wasserstein_distance",
]
