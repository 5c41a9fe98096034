"""Transform package: lifting pairs to the reparameterized problem and back."""

from .reparam import (
    CanonicalLift,
    VProfile,
    bilipschitz_report,
    canonical_lift,
    check_admissible_tau,
    cost_fixed_control,
    invert_time,
    lift_to_tau,
    parse_profile,
    project_from_tau,
    projection_grid,
    roundtrip_errors,
    transform_report,
)

__all__ = [
    "CanonicalLift",
    "VProfile",
    "bilipschitz_report",
    "canonical_lift",
    "check_admissible_tau",
    "cost_fixed_control",
    "invert_time",
    "lift_to_tau",
    "parse_profile",
    "project_from_tau",
    "projection_grid",
    "roundtrip_errors",
    "transform_report",
]
