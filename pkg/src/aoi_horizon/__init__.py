"""Finite-horizon age-of-information scheduling: solver, simulator and experiments."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DelayModel,
    DomainError,
    PenaltyParams,
    Policy,
    Segment,
    Trajectory,
    age_at,
    build_trajectory,
    classify_useful,
)
from .solver import (  # noqa: E402
    OrderingViolation,
    RecastError,
    SolverInput,
    infinite_horizon_policy,
    recast_after_clamp,
    reorder_sources,
    solve_critical_policy,
)
from .analytics import (  # noqa: E402
    ExperimentStats,
    expected_penalty,
    full_vs_partial_dominates,
    monte_carlo,
    partial_update_penalty_closed_form,
    partial_update_policy,
    variance_upper_bound,
)

__all__ = [
    "DelayModel", "DomainError", "PenaltyParams", "Policy", "Segment", "Trajectory",
    "age_at", "build_trajectory", "classify_useful",
    "OrderingViolation", "RecastError", "SolverInput", "infinite_horizon_policy",
    "recast_after_clamp", "reorder_sources", "solve_critical_policy",
    "ExperimentStats", "expected_penalty", "full_vs_partial_dominates", "monte_carlo",
    "partial_update_penalty_closed_form", "partial_update_policy", "variance_upper_bound",
]
