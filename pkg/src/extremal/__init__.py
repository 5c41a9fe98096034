"""Extremal package: Hamiltonians, adjoint residuals, maximality and the lift/projection of extremals."""

from .extremal import (
    Extremal,
    MaximalityReport,
    TauExtremal,
    adjoint_residual_P,
    adjoint_residual_Ptau,
    box_bounds,
    classify_abnormal,
    grid_supremum,
    lift_extremal,
    make_extremal,
    maximality_check_P,
    maximality_check_Ptau,
    project_extremal,
    tau_hamiltonian_nodes,
    verify_extremal,
    zero_level_max,
)
from .hamiltonian import (
    hamiltonian_P,
    hamiltonian_P_batch,
    hamiltonian_Ptau,
    hamiltonian_Ptau_batch,
    hamiltonian_expr,
    hamiltonian_x_gradient,
    tau_hamiltonian_expr,
    tau_point,
)

__all__ = [
    "Extremal",
    "MaximalityReport",
    "TauExtremal",
    "adjoint_residual_P",
    "adjoint_residual_Ptau",
    "box_bounds",
    "classify_abnormal",
    "grid_supremum",
    "hamiltonian_P",
    "hamiltonian_P_batch",
    "hamiltonian_Ptau",
    "hamiltonian_Ptau_batch",
    "hamiltonian_expr",
    "hamiltonian_x_gradient",
    "lift_extremal",
    "make_extremal",
    "maximality_check_P",
    "maximality_check_Ptau",
    "project_extremal",
    "tau_hamiltonian_expr",
    "tau_hamiltonian_nodes",
    "tau_point",
    "verify_extremal",
    "zero_level_max",
]
