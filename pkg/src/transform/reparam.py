"""Time reparameterization between the original problem and its tau-form.

A speed profile v on [a, b] (piecewise-constant, 0.5 <= v <= 1.5, integral
b - a) defines t(tau) = a + int_a^tau v. Lifting a pair places the tau-grid
at the pre-images tau_j = t^{-1}(t_j) of the pair's own nodes, so each tau-cell
maps onto exactly one cell of the pair: there z = x(t(tau)) and w = u(t(tau))
hold at every node, the lifted v is the cell average of the profile, and
costs and dynamics residuals agree with the pair's up to round-off.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import torch

from config.check_config import V_MAX, V_MIN
from src.errors import InvariantError, NotAdmissibleError
from src.problem.costing import boundary_error, check_admissible, cost_P, cost_Ptau, trapezoid
from src.problem.grid import GridFn, as_tensor, control_rows, uniform_nodes
from src.problem.model import ENDPOINT_TOLERANCE, AdmissiblePair, FixedControlProblem, OCProblem, TauQuadruple, fix_control
from src.expr import PointBatch


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VProfile:
    v: GridFn

    def __post_init__(self) -> None:
        if self.v.dim != 1:
            raise InvariantError("Speed profile must be scalar")
        cells = self.cells
        if bool((cells < V_MIN).any() or (cells > V_MAX).any()):
            bad = float(cells.min()) if bool((cells < V_MIN).any()) else float(cells.max())
            raise InvariantError(f"v out of box [{V_MIN}, {V_MAX}]: found {bad}")
        length = self.v.b - self.v.a
        integral = float(torch.sum(self.v.steps * cells))
        if abs(integral - length) > ENDPOINT_TOLERANCE * max(1.0, length):
            raise InvariantError(f"Integral of v is {integral!r}, expected b - a = {length!r}")

    @property
    def cells(self) -> torch.Tensor:
        return self.v.cell_values()[:, 0]

    @classmethod
    def from_cells(cls, nodes, cells) -> "VProfile":
        return cls(GridFn(as_tensor(nodes), control_rows(as_tensor(cells).reshape(-1, 1))))

    @classmethod
    def identity(cls, a: float, b: float, num_intervals: int) -> "VProfile":
        nodes = uniform_nodes(a, b, num_intervals)
        return cls.from_cells(nodes, torch.ones(num_intervals, dtype=nodes.dtype))

    @classmethod
    def two_step(cls, a: float, b: float, num_intervals: int, first: float, second: float) -> "VProfile":
        """``first`` on the left half of the grid, ``second`` on the right half."""
        if num_intervals % 2 != 0:
            raise InvariantError(f"Two-step profile needs an even number of intervals, got {num_intervals}")
        nodes = uniform_nodes(a, b, num_intervals)
        half = num_intervals // 2
        cells = torch.cat(
            [torch.full((half,), float(first), dtype=nodes.dtype), torch.full((half,), float(second), dtype=nodes.dtype)]
        )
        return cls.from_cells(nodes, cells)

    def t_at_nodes(self) -> torch.Tensor:
        """t at the profile's own nodes; exactly the nodes when v == 1."""
        tau = self.v.nodes
        drift = torch.cumsum(self.v.steps * (self.cells - 1.0), dim=0)
        t = torch.cat([tau[:1], tau[1:] + drift])
        t[-1] = tau[-1]
        return t

    def describe(self) -> Dict:
        return {
            "num_intervals": self.v.num_intervals,
            "v_min": float(self.cells.min()),
            "v_max": float(self.cells.max()),
            "integral": float(torch.sum(self.v.steps * self.cells)),
        }


def parse_profile(text: str, a: float, b: float, num_intervals: int) -> VProfile:
    """``"identity"`` or ``"two-step p q"``."""
    parts = str(text).split()
    if parts == ["identity"]:
        return VProfile.identity(a, b, num_intervals)
    if len(parts) == 3 and parts[0] == "two-step":
        try:
            first, second = float(parts[1]), float(parts[2])
        except ValueError as e:
            raise InvariantError(f"Invalid two-step values in profile '{text}'") from e
        return VProfile.two_step(a, b, num_intervals, first, second)
    raise InvariantError(f"Unknown profile '{text}'; use 'identity' or 'two-step p q'")


def invert_time(t_nodes: torch.Tensor, tau_nodes: torch.Tensor, query: torch.Tensor) -> torch.Tensor:
    """Closed-form inverse of the piecewise-linear increasing map tau_nodes -> t_nodes."""
    if not bool(torch.all(t_nodes[1:] > t_nodes[:-1])):
        raise InvariantError("t must be strictly increasing to be inverted")
    tau = GridFn(t_nodes, tau_nodes.reshape(-1, 1)).interp_linear(query)[:, 0]
    tau[query == t_nodes[0]] = tau_nodes[0]
    tau[query == t_nodes[-1]] = tau_nodes[-1]
    return tau


def lift_to_tau(pair: AdmissiblePair, profile: VProfile) -> TauQuadruple:
    scale = max(1.0, abs(pair.x.a), abs(pair.x.b))
    if abs(profile.v.a - pair.x.a) > ENDPOINT_TOLERANCE * scale or abs(profile.v.b - pair.x.b) > ENDPOINT_TOLERANCE * scale:
        raise InvariantError(f"Profile on [{profile.v.a}, {profile.v.b}] does not match pair on [{pair.x.a}, {pair.x.b}]")

    t_nodes = pair.nodes
    tau_nodes = invert_time(profile.t_at_nodes(), profile.v.nodes, t_nodes)
    # A cell straddling a break of v gets the average speed over that cell.
    speeds = (t_nodes[1:] - t_nodes[:-1]) / (tau_nodes[1:] - tau_nodes[:-1])
    speeds = torch.clamp(speeds, V_MIN, V_MAX)

    return TauQuadruple(
        t=GridFn(tau_nodes, t_nodes.reshape(-1, 1).clone()),
        z=GridFn(tau_nodes, pair.x.values.clone()),
        v=GridFn(tau_nodes, control_rows(speeds.reshape(-1, 1))),
        w=GridFn(tau_nodes, pair.u.values.clone()),
    )


def projection_grid(q: TauQuadruple, num_nodes: Optional[int] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """Uniform t-grid on [t(a), t(b)] and its tau pre-images."""
    t_values = q.t.values[:, 0]
    num_nodes = q.t.nodes.shape[0] if num_nodes is None else int(num_nodes)
    if num_nodes < 2:
        raise InvariantError(f"Projection needs at least two nodes, got {num_nodes}")
    target = uniform_nodes(float(t_values[0]), float(t_values[-1]), num_nodes - 1)
    return target, invert_time(t_values, q.nodes, target)


def project_from_tau(q: TauQuadruple, num_nodes: Optional[int] = None) -> AdmissiblePair:
    """Resample x = z(tau(t)) and u = w(tau(t)) on a uniform t-grid."""
    target, tau = projection_grid(q, num_nodes)
    states = q.z.interp_linear(tau)
    controls = control_rows(q.w.lookup_left(tau[:-1]))
    return AdmissiblePair(GridFn(target, states), GridFn(target, controls))


@dataclass(frozen=True, eq=False)
class CanonicalLift:
    quad: TauQuadruple
    triple: Tuple[GridFn, GridFn, GridFn]  # (t, z, v) seen by the fixed-control problem
    fixed: FixedControlProblem


def canonical_lift(p: OCProblem, pair: AdmissiblePair, tol: float = 1e-6) -> CanonicalLift:
    """Lift with v == 1, i.e. (tau, x(tau), 1, u(tau)), plus the fixed-control view."""
    report = check_admissible(p, pair, tol)
    if not report["pass"]:
        raise NotAdmissibleError(
            f"Pair is not admissible: residual {report['max_residual']:.3e}, boundary {report['boundary_error']:.3e}",
            report,
        )
    nodes = pair.nodes
    profile = VProfile(GridFn(nodes, torch.ones((nodes.shape[0], 1), dtype=nodes.dtype)))
    quad = lift_to_tau(pair, profile)
    return CanonicalLift(quad=quad, triple=(quad.t, quad.z, quad.v), fixed=fix_control(p, quad.w))


def check_admissible_tau(p: OCProblem, q: TauQuadruple, tol: float) -> Dict:
    """Residuals of t' = v and z' = phi(t, z, w) v at cell midpoints, plus boundary checks."""
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    steps = q.t.steps
    t = q.t.values[:, 0]
    v = q.v.cell_values()[:, 0]
    residual_t = float(((t[1:] - t[:-1]) / steps - v).abs().max())

    z = q.z.values
    mid = PointBatch(0.5 * (t[:-1] + t[1:]), 0.5 * (z[:-1] + z[1:]), q.w.cell_values())
    slopes = (z[1:] - z[:-1]) / steps.unsqueeze(1)
    residual_z = float((slopes - p.dynamics(mid) * v.unsqueeze(1)).abs().max())

    b_error = boundary_error(p, z)
    t_error = max(abs(float(t[0]) - p.a), abs(float(t[-1]) - p.b))
    integral = q.v_integral()
    integral_error = abs(integral - (p.b - p.a))
    passed = max(residual_t, residual_z, b_error) <= tol and t_error <= tol and integral_error <= tol
    return {
        "max_residual_t": residual_t,
        "max_residual_z": residual_z,
        "boundary_error": b_error,
        "time_endpoint_error": t_error,
        "integral_error": integral_error,
        "tol": float(tol),
        "pass": passed,
    }


def cost_fixed_control(fixed: FixedControlProblem, t: GridFn, z: GridFn, v: GridFn) -> float:
    """Cost of the fixed-control problem; w is read on each cell from its left tau-node."""
    tau = t.nodes
    cell_tau = tau[:-1]
    t_values = t.values[:, 0]
    speeds = v.cell_values()[:, 0]
    left = fixed.F(cell_tau, t_values[:-1], z.values[:-1], speeds)
    right = fixed.F(cell_tau, t_values[1:], z.values[1:], speeds)
    return trapezoid(t.steps, left, right)


def bilipschitz_report(q: TauQuadruple) -> Dict:
    """Check 0.5 |tau_i - tau_j| <= |t_i - t_j| <= 1.5 |tau_i - tau_j| over all node pairs."""
    tau = q.nodes
    t = q.t.values[:, 0]
    d_tau = (tau.unsqueeze(0) - tau.unsqueeze(1)).abs()
    d_t = (t.unsqueeze(0) - t.unsqueeze(1)).abs()
    upper = torch.triu(torch.ones_like(d_tau, dtype=torch.bool), diagonal=1)
    ratios = d_t[upper] / d_tau[upper]
    min_ratio, max_ratio = float(ratios.min()), float(ratios.max())
    slack = 1e-12
    return {
        "min_ratio": min_ratio,
        "max_ratio": max_ratio,
        "pass": min_ratio >= V_MIN * (1 - slack) and max_ratio <= V_MAX * (1 + slack),
    }


def roundtrip_errors(original: AdmissiblePair, recovered: AdmissiblePair) -> Tuple[float, float]:
    """Sup-norm state error and control error of ``recovered`` against ``original`` at recovered nodes."""
    nodes = recovered.nodes
    if torch.equal(nodes, original.nodes):
        x_ref, u_ref = original.x.values, original.u.values
    else:
        x_ref = original.x.interp_linear(nodes)
        u_ref = original.u.lookup_left(nodes)
    x_err = float((recovered.x.values - x_ref).abs().max())
    u_err = float((recovered.u.cell_values() - u_ref[:-1]).abs().max())
    return x_err, u_err


def transform_report(p: OCProblem, pair: AdmissiblePair, profile: VProfile, tol: float = 1e-6) -> Dict:
    quad = lift_to_tau(pair, profile)
    recovered = project_from_tau(quad)
    c_p = cost_P(p, pair)
    c_tau = cost_Ptau(p, quad)
    x_err, u_err = roundtrip_errors(pair, recovered)
    report = {
        "problem": p.name,
        "nodes": pair.num_intervals + 1,
        "profile": profile.describe(),
        "cost_P": c_p,
        "cost_Ptau": c_tau,
        "abs_diff": abs(c_p - c_tau),
        "roundtrip_sup_error": x_err,
        "roundtrip_control_error": u_err,
        "cost_P_roundtrip": cost_P(p, recovered),
        "admissible_P": check_admissible(p, pair, tol),
        "admissible_Ptau": check_admissible_tau(p, quad, tol),
        "bilipschitz": bilipschitz_report(quad),
    }
    logger.info(f"Transform of '{p.name}': |cost_P - cost_Ptau| = {report['abs_diff']:.3e}, roundtrip {x_err:.3e}")
    return report
