import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import torch

from config.check_config import EPSILON
from config.solver_config import STABILITY_THRESHOLD, SWEEP_NODES, SolverOptions, get_solver_options
from src.errors import InvariantError, SolverError
from src.expr import PointBatch
from src.extremal import Extremal, hamiltonian_P_batch, make_extremal
from src.problem.costing import pair_on_grid
from src.problem.grid import DTYPE
from src.problem.model import AdmissiblePair, OCProblem
from src.solver.auglag import EventHook, SolveResult, solve
from src.solver.transcription import transcribe


logger = logging.getLogger(__name__)


def psi_from_duals(multipliers: torch.Tensor) -> torch.Tensor:
    """Node values of psi from interval multipliers: neighbour averages inside, linear extrapolation at the ends."""
    lam = multipliers
    if lam.shape[0] == 1:
        return torch.cat([lam, lam])
    inner = 0.5 * (lam[:-1] + lam[1:])
    first = 1.5 * lam[0] - 0.5 * lam[1]
    last = 1.5 * lam[-1] - 0.5 * lam[-2]
    return torch.cat([first.reshape(1, -1), inner, last.reshape(1, -1)])


def extremal_from_duals(result: SolveResult) -> Extremal:
    """Normal extremal estimate (psi0 = -1) built from the solver multipliers."""
    return make_extremal(result.pair, -1.0, psi_from_duals(result.multipliers))


def _node_batch(pair: AdmissiblePair) -> PointBatch:
    return PointBatch(pair.nodes, pair.x.values, pair.u.values)


def trajectory_bounds(p: OCProblem, result: SolveResult) -> Dict:
    """sup |phi| along the solution and the multiplier bound max(|p_t|, |p_z|) of its identity lift."""
    batch = _node_batch(result.pair)
    phi_sup = float(torch.linalg.vector_norm(p.dynamics(batch), dim=1).max())
    extremal = extremal_from_duals(result)
    hamiltonian = hamiltonian_P_batch(p, batch, extremal.psi0, extremal.psi.values)
    bound = max(float(hamiltonian.abs().max()), extremal.psi.sup_norm())
    return {"phi_sup": phi_sup, "multiplier_bound": bound}


def _solve_grid(args) -> SolveResult:
    p, num_intervals, opts = args
    return solve(transcribe(p, num_intervals), opts=opts)


def sweep(
    p: OCProblem,
    node_counts: Sequence[int] = SWEEP_NODES,
    opts: Optional[SolverOptions] = None,
    workers: int = 1,
    on_outer: Optional[EventHook] = None,
) -> List[SolveResult]:
    """Independent solves on each grid; with workers > 1 they run in separate processes."""
    opts = opts or get_solver_options()
    jobs = [(p, int(n), opts) for n in node_counts]
    if workers > 1 and len(jobs) > 1:
        logger.info(f"Solving {len(jobs)} grids with {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(_solve_grid, jobs))
    return [solve(transcribe(p, n), opts=o, on_outer=on_outer) for p, n, o in jobs]


def boundedness_diagnostic(
    p: OCProblem,
    node_counts: Sequence[int] = SWEEP_NODES,
    opts: Optional[SolverOptions] = None,
    workers: int = 1,
    on_outer: Optional[EventHook] = None,
) -> Dict:
    """Control sup-norms across refined grids; "bounded-stable" when the last relative change is small."""
    counts = [int(n) for n in node_counts]
    if len(counts) < 2:
        raise InvariantError(f"Boundedness diagnostic needs at least 2 grids, got {counts}")
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise InvariantError(f"Grid sizes must be increasing, got {counts}")

    results = sweep(p, counts, opts=opts, workers=workers, on_outer=on_outer)
    return boundedness_from_results(p, counts, results)


def boundedness_from_results(p: OCProblem, node_counts: Sequence[int], results: Sequence[SolveResult]) -> Dict:
    counts = [int(n) for n in node_counts]
    failed = [n for n, result in zip(counts, results) if not result.converged]
    if failed:
        raise SolverError(f"Solve of '{p.name}' did not converge for N in {failed}")

    sup_norms = [result.control_sup_norm for result in results]
    changes = [abs(b - a) / max(abs(a), EPSILON) for a, b in zip(sup_norms, sup_norms[1:])]
    verdict = "bounded-stable" if changes[-1] <= STABILITY_THRESHOLD else "unstable"
    grids = []
    for n, result in zip(counts, results):
        grids.append({"nodes": n, "cost": result.cost, "control_sup_norm": result.control_sup_norm, **trajectory_bounds(p, result)})
    logger.info(f"Boundedness diagnostic for '{p.name}': sup-norms {sup_norms}, {verdict}")
    return {
        "problem": p.name,
        "grids": grids,
        "relative_changes": changes,
        "threshold": STABILITY_THRESHOLD,
        "verdict": verdict,
    }


def write_trajectory_csv(path: Union[str, Path], pair: AdmissiblePair) -> Path:
    """One row per node: t, x1..xn, u1..ur (the last control row repeats the last interval)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, r = pair.x.dim, pair.u.dim
    header = ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{j}" for j in range(1, r + 1)]
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for t, x, u in zip(pair.nodes.tolist(), pair.x.values.tolist(), pair.u.values.tolist()):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in u])
    return path


def read_trajectory_csv(path: Union[str, Path]) -> AdmissiblePair:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if len(rows) < 3:
        raise InvariantError(f"Trajectory file {path} needs a header and at least two rows")
    header = rows[0]
    n = sum(1 for name in header if name.startswith("x"))
    r = sum(1 for name in header if name.startswith("u"))
    expected = ["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"u{j}" for j in range(1, r + 1)]
    if header != expected or n < 1 or r < 1:
        raise InvariantError(f"Unexpected trajectory header {header} in {path}")
    values = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InvariantError(f"Row has {len(row)} fields, expected {len(header)} ({path}, line {line})")
        try:
            values.append([float(v) for v in row])
        except ValueError as exc:
            raise InvariantError(f"Non-numeric value in {path}, line {line}: {exc}") from exc
    table = torch.tensor(values, dtype=DTYPE)
    return pair_on_grid(table[:, 0], table[:, 1 : 1 + n], table[:, 1 + n :])
