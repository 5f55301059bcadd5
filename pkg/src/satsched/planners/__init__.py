"""The three scheduling algorithms and shared plan machinery."""

from .graph import plan_graph
from .mdp import ForwardSearch, plan_mdp_forward_search, select_action
from .milp import MilpModel, build_milp_model, plan_milp
from .types import (
    MdpState,
    PlanEntry,
    PlanValidationError,
    TaskPlan,
    plan_from_collects,
    reward,
    validate_plan,
)

__all__ = [
    "ForwardSearch",
    "MdpState",
    "MilpModel",
    "PlanEntry",
    "PlanValidationError",
    "TaskPlan",
    "build_milp_model",
    "plan_from_collects",
    "plan_graph",
    "plan_mdp_forward_search",
    "plan_milp",
    "reward",
    "select_action",
    "validate_plan",
]
