"""Subcommands of ``scripts/run_ocp.py``.

Each ``cmd_*`` takes a ``RunConfig`` and returns ``(exit_code, report)``:
0 on success, 1 when a verdict fails. ``execute`` adds the JSON rendering
and turns usage and evaluation errors into exit code 2.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple

from config.check_config import (
    DEFAULT_BOX_U,
    DEFAULT_BOX_X,
    DEFAULT_SHELLS,
    DEFAULT_VERIFY_BOX,
    SAMPLE_COUNT,
    TRANSFORM_TOLERANCE,
    VERIFY_ADJOINT_TOLERANCE,
    VERIFY_GAP_TOLERANCE,
    ZERO_LEVEL_TOLERANCE,
)
from config.problem_registry import get_builtin_path
from config.solver_config import SWEEP_NODES, get_solver_options
from src.errors import SolverError
from src.extremal import verify_extremal
from src.problem import AdmissiblePair, OCProblem, check_admissible, cost_P, default_pair, load_problem
from src.regularity import (
    SampleBox,
    check_affine,
    check_alpha_bound,
    check_coercivity,
    check_growth_theorem53,
    check_growth_tonelli_morrey_cv,
)
from src.reporting import dumps_report
from src.solver import (
    SolveResult,
    boundedness_from_results,
    extremal_from_duals,
    read_trajectory_csv,
    solve,
    sweep,
    transcribe,
    write_trajectory_csv,
)
from src.transform import VProfile, parse_profile, transform_report


logger = logging.getLogger(__name__)


Report = Dict
CommandResult = Tuple[int, Report]
EventHook = Callable[[Dict], None]

COMMANDS = ("validate", "cost", "transform", "solve", "check", "verify-extremal", "example")
CHECKS = ("growth", "cov", "coercivity", "affine", "alpha")


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: Optional[Path] = None
    builtin: Optional[str] = None
    check: Optional[str] = None
    seed: int = 0
    nodes: int = 100
    box_u: Optional[Tuple[float, float]] = None
    box_x: Tuple[float, float] = DEFAULT_BOX_X
    shells: int = DEFAULT_SHELLS
    samples: int = SAMPLE_COUNT
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    max_iter: Optional[int] = None
    profile: str = "identity"
    pair: Optional[Path] = None
    workers: int = 1
    sweep_nodes: Tuple[int, ...] = SWEEP_NODES
    out: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"Unknown command '{self.command}'. Choose from: {list(COMMANDS)}")
        if (self.problem is None) == (self.builtin is None):
            raise ValueError("Exactly one of --problem and --builtin must be given")
        if self.command == "check" and self.check not in CHECKS:
            raise ValueError(f"check needs one of {list(CHECKS)}, got {self.check!r}")
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError(f"Tolerances must be > 0, got feas_tol={self.feas_tol}, opt_tol={self.opt_tol}")
        if self.nodes < 2:
            raise ValueError(f"--nodes must be >= 2, got {self.nodes}")
        if self.workers < 1:
            raise ValueError(f"--workers must be >= 1, got {self.workers}")
        if len(self.sweep_nodes) < 2 or any(lo >= hi for lo, hi in zip(self.sweep_nodes, self.sweep_nodes[1:])):
            raise ValueError(f"--sweep-nodes needs at least 2 increasing grids, got {list(self.sweep_nodes)}")
        if self.sweep_nodes[0] < 2:
            raise ValueError(f"--sweep-nodes must all be >= 2, got {list(self.sweep_nodes)}")

    def solver_options(self):
        return get_solver_options(feas_tol=self.feas_tol, opt_tol=self.opt_tol, max_iter=self.max_iter)

    def sample_box(self, p: OCProblem) -> SampleBox:
        return SampleBox.for_problem(p, box_u=self.box_u or DEFAULT_BOX_U, box_x=self.box_x, count=self.samples, seed=self.seed)


def load_config_problem(cfg: RunConfig) -> OCProblem:
    if cfg.builtin is not None:
        return load_problem(get_builtin_path(cfg.builtin), name=cfg.builtin)
    return load_problem(cfg.problem)


def _config_pair(cfg: RunConfig, p: OCProblem) -> AdmissiblePair:
    if cfg.pair is not None:
        pair = read_trajectory_csv(cfg.pair)
        pair.check_dims(p.n, p.r)
        return pair
    return default_pair(p, cfg.nodes)


def error_report(exc: BaseException) -> Report:
    detail = {"type": type(exc).__name__, "message": str(exc)}
    for name in ("offset", "key", "line", "subexpression"):
        value = getattr(exc, name, None)
        if value is not None:
            detail[name] = value
    point = getattr(exc, "point", None)
    if point is not None:
        detail["point"] = str(point)
    return {"error": detail}


def cmd_validate(cfg: RunConfig) -> CommandResult:
    p = load_config_problem(cfg)
    return 0, {"command": "validate", "problem": p.describe()}


def cmd_cost(cfg: RunConfig) -> CommandResult:
    p = load_config_problem(cfg)
    pair = _config_pair(cfg, p)
    admissible = check_admissible(p, pair, cfg.feas_tol)
    report = {
        "command": "cost",
        "problem": p.name,
        "nodes": pair.num_intervals + 1,
        "cost_P": cost_P(p, pair),
        "admissible": admissible,
    }
    return (0 if admissible["pass"] else 1), report


def cmd_transform(cfg: RunConfig) -> CommandResult:
    p = load_config_problem(cfg)
    pair = _config_pair(cfg, p)
    profile = parse_profile(cfg.profile, p.a, p.b, pair.num_intervals)
    report = {"command": "transform", **transform_report(p, pair, profile, TRANSFORM_TOLERANCE)}
    passed = (
        report["abs_diff"] <= TRANSFORM_TOLERANCE * (1.0 + abs(report["cost_P"]))
        and report["admissible_P"]["pass"]
        and report["admissible_Ptau"]["pass"]
    )
    return (0 if passed else 1), report


def _solve_report(p: OCProblem, result: SolveResult, feas_tol: float) -> Report:
    return {**result.to_dict(), "admissible": check_admissible(p, result.pair, feas_tol)}


def cmd_solve(cfg: RunConfig, on_event: Optional[EventHook] = None) -> CommandResult:
    p = load_config_problem(cfg)
    result = solve(transcribe(p, cfg.nodes), opts=cfg.solver_options(), on_outer=on_event)
    report = {"command": "solve", "problem": p.name, **_solve_report(p, result, cfg.feas_tol)}
    if cfg.out is not None:
        csv_path = write_trajectory_csv(Path(cfg.out).with_suffix(".csv"), result.pair)
        report["trajectory_csv"] = csv_path.name
    return (0 if result.converged else 1), report


def _run_check(cfg: RunConfig, p: OCProblem, which: str) -> CommandResult:
    if which == "alpha":
        w = default_pair(p, cfg.nodes).u
        report = check_alpha_bound(p, w, cfg.box_x, seed=cfg.seed).to_dict()
        return (0 if report["verdict"] == "finite" else 1), report
    box = cfg.sample_box(p)
    if which == "growth":
        growth = check_growth_theorem53(p, box)
        return (0 if growth.verdict == "satisfied-on-box" else 1), growth.to_dict()
    if which == "cov":
        growth = check_growth_tonelli_morrey_cv(p, box)
        return (0 if growth.verdict == "satisfied-on-box" else 1), growth.to_dict()
    if which == "coercivity":
        coercivity = check_coercivity(p, box, cfg.shells)
        return (0 if coercivity.verdict == "pass" else 1), coercivity.to_dict()
    affine = check_affine(p, box)
    return (0 if affine.verdict == "applicable" else 1), affine.to_dict()


def cmd_check(cfg: RunConfig) -> CommandResult:
    p = load_config_problem(cfg)
    code, report = _run_check(cfg, p, cfg.check)
    return code, {"command": "check", "problem": p.name, **report}


def _verification_profiles(pair: AdmissiblePair) -> Dict[str, VProfile]:
    a, b, N = pair.x.a, pair.x.b, pair.num_intervals
    profiles = {"identity": VProfile.identity(a, b, N)}
    if N % 2 == 0:
        profiles["two-step 0.5 1.5"] = VProfile.two_step(a, b, N, 0.5, 1.5)
    return profiles


def _verify_solved(cfg: RunConfig, p: OCProblem, result: SolveResult) -> CommandResult:
    extremal = extremal_from_duals(result)
    report = verify_extremal(p, extremal, cfg.box_u or DEFAULT_VERIFY_BOX, profiles=_verification_profiles(result.pair))
    scale = max(1.0, extremal.psi.sup_norm())
    passed = (
        report["adjoint_residual"] <= VERIFY_ADJOINT_TOLERANCE * scale
        and report["worst_gap"] <= VERIFY_GAP_TOLERANCE * scale
        and report["hamiltonian_zero_level_max"] <= ZERO_LEVEL_TOLERANCE * scale
    )
    report = {**report, "multipliers": "estimated from collocation duals, psi0 = -1", "pass": passed}
    return (0 if passed else 1), report


def cmd_verify_extremal(cfg: RunConfig, on_event: Optional[EventHook] = None) -> CommandResult:
    p = load_config_problem(cfg)
    result = solve(transcribe(p, cfg.nodes), opts=cfg.solver_options(), on_outer=on_event)
    report = {"command": "verify-extremal", "problem": p.name, "solve": _solve_report(p, result, cfg.feas_tol)}
    if not result.converged:
        return 1, {**report, "pass": False}
    code, verification = _verify_solved(cfg, p, result)
    return code, {**report, "verification": verification}


def _stage(stages: Dict, name: str, run: Callable[[], CommandResult]) -> int:
    try:
        code, report = run()
    except ValueError as exc:
        logger.warning(f"Stage '{name}' failed: {exc}")
        stages[name] = {**error_report(exc), "exit": 2}
        return 2
    stages[name] = {**report, "exit": code}
    return code


def cmd_example(cfg: RunConfig, on_event: Optional[EventHook] = None) -> CommandResult:
    """validate, growth, coercivity, affine, solve sweep with the boundedness diagnostic, extremal verification."""
    p = load_config_problem(cfg)
    stages: Dict[str, Report] = {"validate": {"problem": p.describe(), "exit": 0}}
    codes = [
        _stage(stages, "growth", lambda: _run_check(cfg, p, "growth")),
    ]
    if p.is_calculus_of_variations():
        codes.append(_stage(stages, "growth_cov", lambda: _run_check(cfg, p, "cov")))
    codes.append(_stage(stages, "coercivity", lambda: _run_check(cfg, p, "coercivity")))
    # Informational: a non-affine problem is reported, not failed.
    _stage(stages, "affine", lambda: _run_check(cfg, p, "affine"))

    opts = cfg.solver_options()
    results = []

    def boundedness() -> CommandResult:
        results.extend(sweep(p, cfg.sweep_nodes, opts=opts, workers=cfg.workers, on_outer=on_event))
        report = boundedness_from_results(p, cfg.sweep_nodes, results)
        return (0 if report["verdict"] == "bounded-stable" else 1), report

    codes.append(_stage(stages, "boundedness", boundedness))

    def verification() -> CommandResult:
        if not results:
            raise SolverError("No solved grid to verify")
        finest = results[-1]
        if not finest.converged:
            return 1, {"solve": _solve_report(p, finest, cfg.feas_tol), "pass": False}
        return _verify_solved(cfg, p, finest)

    codes.append(_stage(stages, "extremal", verification))
    worst = max(codes)
    return worst, {"command": "example", "problem": p.name, "seed": cfg.seed, "stages": stages, "pass": worst == 0}


def dispatch(cfg: RunConfig, on_event: Optional[EventHook] = None) -> CommandResult:
    if cfg.command == "validate":
        return cmd_validate(cfg)
    if cfg.command == "cost":
        return cmd_cost(cfg)
    if cfg.command == "transform":
        return cmd_transform(cfg)
    if cfg.command == "solve":
        return cmd_solve(cfg, on_event)
    if cfg.command == "check":
        return cmd_check(cfg)
    if cfg.command == "verify-extremal":
        return cmd_verify_extremal(cfg, on_event)
    return cmd_example(cfg, on_event)


def execute(cfg: RunConfig, on_event: Optional[EventHook] = None) -> Tuple[int, str]:
    """Run one command and render its JSON document; ValueError and OSError map to exit code 2."""
    try:
        code, report = dispatch(cfg, on_event)
    except (ValueError, OSError) as exc:
        logger.error(f"{cfg.command} failed: {exc}")
        return 2, dumps_report(error_report(exc))
    return code, dumps_report(report)
