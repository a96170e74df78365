"""Equitable budget allocation for restless multi-armed bandits.

A solver library and simulation CLI for splitting a per-round action budget
across groups of restless bandit arms under maximin-reward and max-Nash-
welfare objectives, with Whittle-index policies executed in seeded Markov
simulations over three fully parameterized domains.
"""

__version__ = "0.1.0"

from .allocate import (
    AllocationResult,
    BudgetExceedsArms,
    FunctionOracle,
    GroupValueOracle,
    LagrangeBoundOracle,
    NonPositiveValue,
    allocate_mmr,
    allocate_mnw,
    rescale,
    upsample,
)
from .domains import (
    DiabetesSpec,
    DiabetesState,
    MaternalSpec,
    SyntheticSpec,
    build_diabetes,
    build_maternal,
    build_synthetic,
    load_group_table,
)
from .mdp import (
    ArmModel,
    ChargedValueTable,
    GroupedInstance,
    InstanceTooLarge,
    RewardOutOfRange,
    RowNotStochastic,
    charged_value_iteration,
    exact_joint_value,
    validate_arm,
)
from .policies import (
    ActionVector,
    DomainLacksClinicalFlag,
    MissingAllocation,
    POLICY_KINDS,
    PolicySpec,
    UnknownPolicy,
    select_actions,
)
from .simulate import (
    AggregateSummary,
    BudgetViolation,
    EmptyInput,
    NegativeInput,
    SimulationRecord,
    aggregate,
    gini,
    run_episode,
)
from .whittle import (
    BudgetExceedsGroup,
    GroupValueBound,
    IndexCache,
    NotIndexableWarning,
    WhittleIndexSet,
    compute_index_set,
    whittle_index,
    whittle_to_lagrange,
)

__all__ = [
    "__version__",
    "ActionVector",
    "AggregateSummary",
    "AllocationResult",
    "ArmModel",
    "BudgetExceedsArms",
    "BudgetExceedsGroup",
    "BudgetViolation",
    "ChargedValueTable",
    "DiabetesSpec",
    "DiabetesState",
    "DomainLacksClinicalFlag",
    "EmptyInput",
    "FunctionOracle",
    "GroupValueBound",
    "GroupValueOracle",
    "GroupedInstance",
    "IndexCache",
    "InstanceTooLarge",
    "LagrangeBoundOracle",
    "MaternalSpec",
    "MissingAllocation",
    "NegativeInput",
    "NonPositiveValue",
    "NotIndexableWarning",
    "POLICY_KINDS",
    "PolicySpec",
    "RewardOutOfRange",
    "RowNotStochastic",
    "SimulationRecord",
    "SyntheticSpec",
    "UnknownPolicy",
    "WhittleIndexSet",
    "aggregate",
    "allocate_mmr",
    "allocate_mnw",
    "build_diabetes",
    "build_maternal",
    "build_synthetic",
    "charged_value_iteration",
    "compute_index_set",
    "exact_joint_value",
    "gini",
    "load_group_table",
    "rescale",
    "run_episode",
    "select_actions",
    "upsample",
    "validate_arm",
    "whittle_index",
    "whittle_to_lagrange",
]
