import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from config.check_config import DEFAULT_BOX_X, DEFAULT_SHELLS, SAMPLE_COUNT
from config.solver_config import SOLVER_DEFAULTS, SWEEP_NODES
from src.cli import CHECKS, RunConfig, error_report, execute
from src.reporting import dumps_report


logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXAMPLES = ("baseline", "lq", "torres-6.1")


def _add_common(parser: argparse.ArgumentParser, needs_problem: bool = True) -> None:
    if needs_problem:
        source = parser.add_mutually_exclusive_group()
        source.add_argument("--problem", type=Path, default=None, help="Problem definition file.")
        source.add_argument("--builtin", type=str, default=None, help="Bundled problem name.")
    parser.add_argument("--seed", type=int, default=0, help="Seed for every sampled check.")
    parser.add_argument("--nodes", type=int, default=100, help="Number of grid intervals N.")
    parser.add_argument("--box-u", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    parser.add_argument("--box-x", type=float, nargs=2, default=list(DEFAULT_BOX_X), metavar=("LO", "HI"))
    parser.add_argument("--shells", type=int, default=DEFAULT_SHELLS)
    parser.add_argument("--samples", type=int, default=SAMPLE_COUNT)
    parser.add_argument("--feas-tol", type=float, default=SOLVER_DEFAULTS["feas_tol"])
    parser.add_argument("--opt-tol", type=float, default=SOLVER_DEFAULTS["opt_tol"])
    parser.add_argument("--max-iter", type=int, default=None)
    parser.add_argument("--profile", type=str, default="identity", help='"identity" or "two-step P Q".')
    parser.add_argument("--pair", type=Path, default=None, help="Trajectory CSV (t, x1.., u1..).")
    parser.add_argument("--workers", type=int, default=1, help="Processes for the grid sweep.")
    parser.add_argument("--out", type=Path, default=None, help="Write the JSON report here instead of stdout.")
    parser.add_argument("--log-file", type=Path, default=None)
    parser.add_argument("--events-file", type=Path, default=None)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Lagrange optimal control toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "Load a problem and report its dimensions."),
        ("cost", "Cost and admissibility of a pair."),
        ("transform", "Lift a pair to the reparameterized problem and project it back."),
        ("solve", "Direct-collocation solve."),
        ("verify-extremal", "Solve and verify the extremal built from the solver multipliers."),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    check = sub.add_parser("check", help="Sampled regularity checks.")
    check.add_argument("check", choices=CHECKS)
    _add_common(check)
    example = sub.add_parser("example", help="Full pipeline on a bundled problem.")
    example.add_argument("name", type=str, help=f"One of {', '.join(EXAMPLES)}.")
    example.add_argument(
        "--sweep-nodes", type=int, nargs="+", default=list(SWEEP_NODES), help="Grid sizes of the boundedness sweep."
    )
    _add_common(example, needs_problem=False)
    return parser.parse_args(argv)


def _setup_file_logger(log_file: Path) -> logging.Logger:
    log_file.parent.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(log_file, encoding="utf-8")
    fh.setLevel(logging.INFO)
    fh.setFormatter(logging.Formatter("%(asctime)s | %(levelname)s | %(message)s"))
    logging.getLogger().addHandler(fh)
    return logging.getLogger("run_ocp")


def _append_event(events_file: Path, payload: dict) -> None:
    events_file.parent.mkdir(parents=True, exist_ok=True)
    row = {"timestamp": datetime.now().isoformat(), **payload}
    with open(events_file, "a", encoding="utf-8") as f:
        f.write(json.dumps(row, ensure_ascii=False) + "\n")


def _serialize_args(args: argparse.Namespace) -> dict:
    serialized = {}
    for k, v in vars(args).items():
        if isinstance(v, Path):
            serialized[k] = str(v)
        else:
            serialized[k] = v
    return serialized


def build_config(args: argparse.Namespace) -> RunConfig:
    builtin = args.name if args.command == "example" else args.builtin
    return RunConfig(
        command=args.command,
        problem=getattr(args, "problem", None),
        builtin=builtin,
        check=getattr(args, "check", None),
        seed=args.seed,
        nodes=args.nodes,
        box_u=tuple(args.box_u) if args.box_u is not None else None,
        box_x=tuple(args.box_x),
        shells=args.shells,
        samples=args.samples,
        feas_tol=args.feas_tol,
        opt_tol=args.opt_tol,
        max_iter=args.max_iter,
        profile=args.profile,
        pair=args.pair,
        workers=args.workers,
        sweep_nodes=tuple(getattr(args, "sweep_nodes", SWEEP_NODES)),
        out=args.out,
    )


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    if args.log_file is not None:
        _setup_file_logger(args.log_file).info(f"Run started: {args.command}")

    on_event = None
    if args.events_file is not None:
        events_file = args.events_file
        _append_event(events_file, {"event": "run_start", "args": _serialize_args(args)})

        def on_event(payload: dict) -> None:
            _append_event(events_file, {"command": args.command, **payload})

    try:
        cfg = build_config(args)
    except ValueError as exc:
        logger.error(f"Invalid arguments: {exc}")
        code, text = 2, dumps_report(error_report(exc))
    else:
        code, text = execute(cfg, on_event)

    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.events_file is not None:
        _append_event(args.events_file, {"event": "run_end", "exit_code": code})
    logger.info(f"{args.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
