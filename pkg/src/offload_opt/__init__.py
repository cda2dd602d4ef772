"""Optimal task offloading between a mobile device and edge servers."""

from .errors import (
    DeadlineInfeasible,
    DeadlineInfeasibleLocally,
    InvalidInstance,
    MalformedPlan,
    OffloadError,
)
from .evaluator import CostBreakdown, evaluate, policy_local, policy_mec, policy_mixed, policy_tos
from .model import (
    DerivedParams,
    DeviceSpec,
    FrequencySchedule,
    Instance,
    OffloadPlan,
    ServerSpec,
    TaskSpec,
    derive_params,
    validate,
)
from .solver import P0Solution, P1Solution, solve_p0, solve_p1

__version__ = "0.1.0"
