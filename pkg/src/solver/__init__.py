"""Direct-collocation solver: transcription, augmented-Lagrangian solve and grid-refinement diagnostics."""

from .auglag import SolveResult, solve
from .diagnostics import (
    boundedness_diagnostic,
    boundedness_from_results,
    extremal_from_duals,
    psi_from_duals,
    read_trajectory_csv,
    sweep,
    trajectory_bounds,
    write_trajectory_csv,
)
from .transcription import Transcription, transcribe

__all__ = [
    "SolveResult",
    "Transcription",
    "boundedness_diagnostic",
    "boundedness_from_results",
    "extremal_from_duals",
    "psi_from_duals",
    "read_trajectory_csv",
    "solve",
    "sweep",
    "transcribe",
    "trajectory_bounds",
    "write_trajectory_csv",
]
