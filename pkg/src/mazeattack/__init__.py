"""Data-free and partial-data model extraction against a query-only classifier."""

from .baselines import JbdaConfig, SurrogateConfig, jbda_augment, run_jbda, run_noise, run_surrogate
from .data import DatasetSpec, SyntheticDataset, make_dataset, surrogate_spec
from .maze import AttackConfig, AttackLog, ReplayBuffer, run_maze, run_maze_whitebox
from .metrics import EvalSet, agreement_rate, clone_accuracy, normalized_accuracy
from .oracle import BlackBoxOracle, BudgetExhausted, QueryLedger, TargetSpec, query_cost_per_iteration, train_target
from .pd import PdConfig, SeedSet, critic_loss, gradient_penalty, run_maze_pd
from .zograd import ZoConfig, estimate_grad, inject_and_backprop

__all__ = [
    "AttackConfig", "AttackLog", "BlackBoxOracle", "BudgetExhausted", "DatasetSpec", "EvalSet",
    "JbdaConfig", "PdConfig", "QueryLedger", "ReplayBuffer", "SeedSet", "SurrogateConfig",
    "SyntheticDataset", "TargetSpec", "ZoConfig", "agreement_rate", "clone_accuracy", "critic_loss",
    "estimate_grad", "gradient_penalty", "inject_and_backprop", "jbda_augment", "make_dataset",
    "normalized_accuracy", "query_cost_per_iteration", "run_jbda", "run_maze", "run_maze_pd",
    "run_maze_whitebox", "run_noise", "run_surrogate", "surrogate_spec", "train_target",
]
