"""Correlated multi-armed bandits with pseudo-reward side information."""

from .analysis import (CompetitivenessReport, RegretTrace, bound_competitive_pulls,
                       bound_noncompetitive_pulls, bound_total_regret, classify_arms,
                       classify_instance, kl_divergence, record_pull, t0_threshold)
from .core import ArmEstimators, PseudoRewardTable, PullRecord, RewardDomain, update_estimators
from .engine import regret_curves, simulate
from .errors import (ConfigError, CorrBanditError, DegenerateInstanceError, DomainError,
                     IngestError, UnsupportedDomainError)
from .experiment import AggregateCurve, ExperimentConfig, emit_csv, parse_csv, report_oracle, run_experiment
from .policies import PolicySpec, compute_competitive_snapshot, run_trial

__version__ = "0.1.0"

__all__ = [
    "AggregateCurve", "ArmEstimators", "CompetitivenessReport", "ConfigError", "CorrBanditError",
    "DegenerateInstanceError", "DomainError", "ExperimentConfig", "IngestError", "PolicySpec",
    "PseudoRewardTable", "PullRecord", "RegretTrace", "RewardDomain", "UnsupportedDomainError",
    "bound_competitive_pulls", "bound_noncompetitive_pulls", "bound_total_regret", "classify_arms",
    "classify_instance", "compute_competitive_snapshot", "emit_csv", "kl_divergence", "parse_csv",
    "record_pull", "regret_curves", "report_oracle", "run_experiment", "run_trial", "simulate",
    "t0_threshold", "update_estimators",
]
