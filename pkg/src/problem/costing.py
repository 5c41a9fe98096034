import logging
from typing import Dict, Optional

import torch

from src.errors import InvariantError
from src.expr import PointBatch
from src.problem.grid import DTYPE, GridFn, as_tensor, control_rows, uniform_nodes
from src.problem.model import ENDPOINT_TOLERANCE, AdmissiblePair, OCProblem, TauQuadruple


logger = logging.getLogger(__name__)


def trapezoid(steps: torch.Tensor, left: torch.Tensor, right: torch.Tensor) -> float:
    """Sum of h/2 * (left + right) over intervals."""
    return float(torch.sum(steps * 0.5 * (left + right)))


def _interval_batches(nodes: torch.Tensor, states: torch.Tensor, controls: torch.Tensor):
    cells = controls[:-1]
    left = PointBatch(nodes[:-1], states[:-1], cells)
    right = PointBatch(nodes[1:], states[1:], cells)
    return left, right


def cost_P(p: OCProblem, pair: AdmissiblePair) -> float:
    """Trapezoidal cost with u held at its left value on each interval."""
    pair.check_dims(p.n, p.r)
    left, right = _interval_batches(pair.nodes, pair.x.values, pair.u.values)
    return trapezoid(pair.x.steps, p.lagrangian(left), p.lagrangian(right))


def _check_profile_integral(q: TauQuadruple) -> None:
    a, b = q.t.a, q.t.b
    integral = q.v_integral()
    if abs(integral - (b - a)) > ENDPOINT_TOLERANCE * max(1.0, b - a):
        raise InvariantError(f"Integral of v is {integral!r}, expected b - a = {b - a!r}")


def cost_Ptau(p: OCProblem, q: TauQuadruple) -> float:
    """Trapezoidal cost of L(t, z, w) * v on the tau-grid of ``q``."""
    if q.z.dim != p.n or q.w.dim != p.r:
        raise InvariantError(f"Quadruple dimensions (n={q.z.dim}, r={q.w.dim}) do not match problem")
    if abs(q.t.a - p.a) > ENDPOINT_TOLERANCE * max(1.0, abs(p.a)) or abs(q.t.b - p.b) > ENDPOINT_TOLERANCE * max(1.0, abs(p.b)):
        raise InvariantError(f"Quadruple lives on [{q.t.a}, {q.t.b}], problem on [{p.a}, {p.b}]")
    _check_profile_integral(q)
    t = q.t.values[:, 0]
    left, right = _interval_batches(t, q.z.values, q.w.values)
    v = q.v.cell_values()[:, 0]
    return trapezoid(q.t.steps, p.lagrangian(left) * v, p.lagrangian(right) * v)


def dynamics_residuals(p: OCProblem, nodes: torch.Tensor, states: torch.Tensor, controls: torch.Tensor) -> torch.Tensor:
    """(x_{i+1} - x_i)/h - phi(t_mid, x_mid, u_i) per interval, shape [N, n]."""
    steps = nodes[1:] - nodes[:-1]
    mid = PointBatch(0.5 * (nodes[:-1] + nodes[1:]), 0.5 * (states[:-1] + states[1:]), controls[:-1])
    slopes = (states[1:] - states[:-1]) / steps.unsqueeze(1)
    return slopes - p.dynamics(mid)


def boundary_error(p: OCProblem, states: torch.Tensor) -> float:
    start = (states[0] - p.A_tensor).abs().max()
    end = (states[-1] - p.B_tensor).abs().max()
    return float(torch.maximum(start, end))


def check_admissible(p: OCProblem, pair: AdmissiblePair, tol: float) -> Dict:
    pair.check_dims(p.n, p.r)
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    residuals = dynamics_residuals(p, pair.nodes, pair.x.values, pair.u.values)
    per_interval = residuals.abs().max(dim=1).values
    max_residual = float(per_interval.max())
    b_error = boundary_error(p, pair.x.values)
    passed = max_residual <= tol and b_error <= tol
    report = {
        "max_residual": max_residual,
        "worst_interval": int(torch.argmax(per_interval)),
        "boundary_error": b_error,
        "tol": float(tol),
        "pass": passed,
    }
    if not passed:
        logger.info(f"Pair not admissible at tol={tol}: residual {max_residual:.3e}, boundary {b_error:.3e}")
    return report


def pair_on_grid(nodes, states, controls) -> AdmissiblePair:
    """Pair from node states [N+1, n] and controls given per interval [N, r] or per node [N+1, r]."""
    nodes = as_tensor(nodes)
    states = as_tensor(states)
    if states.dim() == 1:
        states = states.reshape(-1, 1)
    controls = as_tensor(controls)
    if controls.dim() == 1:
        controls = controls.reshape(-1, 1)
    if controls.shape[0] == nodes.shape[0] - 1:
        controls = control_rows(controls)
    return AdmissiblePair(GridFn(nodes, states), GridFn(nodes, controls))


def default_pair(p: OCProblem, num_intervals: int, nodes: Optional[torch.Tensor] = None) -> AdmissiblePair:
    """States linear from A to B, controls constant (B - A)/(b - a)."""
    if nodes is None:
        nodes = uniform_nodes(p.a, p.b, num_intervals)
    theta = ((nodes - p.a) / (p.b - p.a)).unsqueeze(1)
    A, B = p.A_tensor, p.B_tensor
    states = A + theta * (B - A)
    states[0] = A
    states[-1] = B
    slope = (B - A) / (p.b - p.a)
    controls = slope.reshape(1, -1).repeat(nodes.shape[0], 1).to(DTYPE)
    if controls.shape[1] != p.r:
        controls = torch.zeros((nodes.shape[0], p.r), dtype=DTYPE)
        controls[:, : min(p.n, p.r)] = slope[: min(p.n, p.r)]
    return AdmissiblePair(GridFn(nodes, states), GridFn(nodes, controls))
