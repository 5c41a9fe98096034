"""Defaults for the direct-collocation solver and the boundedness sweep."""

from dataclasses import dataclass, fields, replace


# Outer-loop and inner-loop knobs of the augmented-Lagrangian solver.
SOLVER_DEFAULTS = {
    "feas_tol": 1e-6,
    "opt_tol": 1e-6,
    "max_iter": 20000,
    "max_outer": 40,
    "penalty_init": 10.0,
    "penalty_factor": 10.0,
    "penalty_max": 1e10,
    "lbfgs_memory": 20,
    "armijo": 1e-4,
    "max_backtracks": 60,
    "direction": "lbfgs",
}

# Grids for the boundedness diagnostic.
SWEEP_NODES = (25, 50, 100)
STABILITY_THRESHOLD = 0.05

DIRECTIONS = ("lbfgs", "gradient")


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = SOLVER_DEFAULTS["feas_tol"]
    opt_tol: float = SOLVER_DEFAULTS["opt_tol"]
    max_iter: int = SOLVER_DEFAULTS["max_iter"]
    max_outer: int = SOLVER_DEFAULTS["max_outer"]
    penalty_init: float = SOLVER_DEFAULTS["penalty_init"]
    penalty_factor: float = SOLVER_DEFAULTS["penalty_factor"]
    penalty_max: float = SOLVER_DEFAULTS["penalty_max"]
    lbfgs_memory: int = SOLVER_DEFAULTS["lbfgs_memory"]
    armijo: float = SOLVER_DEFAULTS["armijo"]
    max_backtracks: int = SOLVER_DEFAULTS["max_backtracks"]
    direction: str = SOLVER_DEFAULTS["direction"]

    def __post_init__(self) -> None:
        for name in ("feas_tol", "opt_tol", "penalty_init", "armijo"):
            if float(getattr(self, name)) <= 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.penalty_factor <= 1.0:
            raise ValueError("penalty_factor must be > 1")
        if self.penalty_max < self.penalty_init:
            raise ValueError("penalty_max must be >= penalty_init")
        for name in ("max_iter", "max_outer", "lbfgs_memory", "max_backtracks"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")


def get_solver_options(**overrides) -> SolverOptions:
    """Return solver options with ``None`` overrides ignored."""
    known = {f.name for f in fields(SolverOptions)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"Unknown solver options: {sorted(unknown)}")
    return replace(SolverOptions(), **{k: v for k, v in overrides.items() if v is not None})


if __name__ == "__main__":
    options = get_solver_options()
    print("Solver defaults:")
    for f in fields(options):
        print(f"  {f.name:16s} {getattr(options, f.name)}")
    print(f"Sweep nodes: {SWEEP_NODES}, stability threshold: {STABILITY_THRESHOLD}")
