import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import torch

from config.check_config import MAXIMALITY_GRID, MAXIMALITY_REFINE_PASSES, MAXIMALITY_REFINE_POINTS, V_MAX, V_MIN
from src.errors import InvariantError
from src.expr import PointBatch
from src.extremal.hamiltonian import hamiltonian_P_batch, hamiltonian_Ptau_batch, hamiltonian_x_gradient
from src.problem.grid import DTYPE, GridFn, as_tensor
from src.problem.model import AdmissiblePair, OCProblem, TauQuadruple
from src.transform.reparam import VProfile, lift_to_tau, project_from_tau, projection_grid


logger = logging.getLogger(__name__)

Box = Union[Tuple[float, float], Sequence[Tuple[float, float]]]


@dataclass(frozen=True, eq=False)
class Extremal:
    """Admissible pair with cost multiplier psi0 <= 0 and adjoint psi.

    Normal extremals are stored with psi0 = -1; abnormal ones (psi0 = 0) with
    max |psi| = 1.
    """

    pair: AdmissiblePair
    psi0: float
    psi: GridFn

    def __post_init__(self) -> None:
        psi0 = float(self.psi0)
        if not torch.equal(self.psi.nodes, self.pair.nodes):
            raise InvariantError("Adjoint must live on the grid of the pair")
        if self.psi.dim != self.pair.x.dim:
            raise InvariantError(f"Adjoint has dimension {self.psi.dim}, expected {self.pair.x.dim}")
        if psi0 > 0:
            raise InvariantError(f"Cost multiplier must be <= 0, got {psi0}")
        scale = self.psi.sup_norm()
        if psi0 == 0.0 and scale == 0.0:
            raise InvariantError("Multipliers (psi0, psi) must not vanish together")
        if psi0 < 0 and psi0 != -1.0:
            object.__setattr__(self, "psi", GridFn(self.psi.nodes, self.psi.values / -psi0))
            psi0 = -1.0
        elif psi0 == 0.0 and scale != 1.0:
            object.__setattr__(self, "psi", GridFn(self.psi.nodes, self.psi.values / scale))
        object.__setattr__(self, "psi0", psi0)


@dataclass(frozen=True, eq=False)
class TauExtremal:
    quad: TauQuadruple
    p0: float
    p_t: GridFn
    p_z: GridFn

    def __post_init__(self) -> None:
        p0 = float(self.p0)
        if p0 > 0:
            raise InvariantError(f"Cost multiplier must be <= 0, got {p0}")
        for name in ("p_t", "p_z"):
            if not torch.equal(getattr(self, name).nodes, self.quad.nodes):
                raise InvariantError(f"{name} must live on the tau-grid")
        if self.p_t.dim != 1 or self.p_z.dim != self.quad.z.dim:
            raise InvariantError("Multiplier dimensions do not match the quadruple")
        if p0 == 0.0 and self.p_t.sup_norm() == 0.0 and self.p_z.sup_norm() == 0.0:
            raise InvariantError("Multipliers (p0, p_t, p_z) must not vanish together")
        object.__setattr__(self, "p0", p0)


@dataclass
class MaximalityReport:
    worst_gap: float
    worst_node: int
    argmax_found: Tuple[float, ...]
    candidate: Tuple[float, ...]
    sup_value: float
    candidate_value: float
    box: List[Tuple[float, float]] = field(default_factory=list)
    grid: int = MAXIMALITY_GRID

    def to_dict(self) -> Dict:
        return {
            "worst_gap": self.worst_gap,
            "worst_node": self.worst_node,
            "argmax_found": list(self.argmax_found),
            "candidate": list(self.candidate),
            "sup_value": self.sup_value,
            "candidate_value": self.candidate_value,
            "box": [list(b) for b in self.box],
            "grid": self.grid,
        }


def make_extremal(pair: AdmissiblePair, psi0: float, psi) -> Extremal:
    psi = as_tensor(psi)
    if psi.dim() <= 1:
        psi = psi.reshape(1, -1).repeat(pair.nodes.shape[0], 1) if psi.numel() == pair.x.dim else psi.reshape(-1, 1)
    return Extremal(pair=pair, psi0=psi0, psi=GridFn(pair.nodes, psi))


def box_bounds(box: Box, r: int) -> Tuple[torch.Tensor, torch.Tensor]:
    pairs = list(box)
    if len(pairs) == 2 and all(isinstance(v, (int, float)) for v in pairs):
        pairs = [tuple(pairs)] * r
    if len(pairs) != r:
        raise InvariantError(f"Control box has {len(pairs)} intervals, expected r={r}")
    lo = torch.tensor([float(p[0]) for p in pairs], dtype=DTYPE)
    hi = torch.tensor([float(p[1]) for p in pairs], dtype=DTYPE)
    if not bool(torch.all(hi > lo)):
        raise InvariantError(f"Control box intervals must be nonempty: {pairs}")
    return lo, hi


def _tensor_grid(lo: torch.Tensor, hi: torch.Tensor, count: int) -> torch.Tensor:
    axes = [torch.linspace(float(l), float(h), count, dtype=DTYPE) for l, h in zip(lo, hi)]
    if len(axes) == 1:
        return axes[0].reshape(-1, 1)
    return torch.cartesian_prod(*axes).reshape(-1, len(axes))


def grid_supremum(
    objective: Callable[[torch.Tensor], torch.Tensor],
    lo: torch.Tensor,
    hi: torch.Tensor,
    grid: int = MAXIMALITY_GRID,
    passes: int = MAXIMALITY_REFINE_PASSES,
    points: int = MAXIMALITY_REFINE_POINTS,
) -> Tuple[float, torch.Tensor]:
    """Tensor-grid search of ``objective`` over the box, then local passes that halve the cell."""
    if grid < 2:
        raise InvariantError(f"Grid needs at least 2 points per axis, got {grid}")
    candidates = _tensor_grid(lo, hi, grid)
    values = torch.nan_to_num(objective(candidates), nan=float("-inf"))
    index = int(torch.argmax(values))
    best_value, best = float(values[index]), candidates[index]
    cell = (hi - lo) / (grid - 1)
    for _ in range(passes):
        sub_lo = torch.maximum(lo, best - cell)
        sub_hi = torch.minimum(hi, best + cell)
        local = _tensor_grid(sub_lo, sub_hi, points)
        local_values = torch.nan_to_num(objective(local), nan=float("-inf"))
        index = int(torch.argmax(local_values))
        if float(local_values[index]) > best_value:
            best_value, best = float(local_values[index]), local[index]
        cell = cell / 2
    return best_value, best


def _check_in_box(controls: torch.Tensor, lo: torch.Tensor, hi: torch.Tensor) -> None:
    outside = (controls < lo) | (controls > hi)
    if bool(outside.any()):
        row = int(torch.nonzero(outside.any(dim=1))[0])
        raise InvariantError(f"Candidate control {controls[row].tolist()} at node {row} lies outside the box")


def adjoint_residual_P(p: OCProblem, e: Extremal) -> float:
    """max_i |(psi_{i+1} - psi_i)/h + dH/dx(midpoint)| in the max-norm."""
    pair = e.pair
    pair.check_dims(p.n, p.r)
    nodes, x, psi = pair.nodes, pair.x.values, e.psi.values
    steps = pair.x.steps.unsqueeze(1)
    mid = PointBatch(0.5 * (nodes[:-1] + nodes[1:]), 0.5 * (x[:-1] + x[1:]), pair.u.cell_values())
    _, d_dx = hamiltonian_x_gradient(p, mid, e.psi0, 0.5 * (psi[:-1] + psi[1:]))
    residual = (psi[1:] - psi[:-1]) / steps + d_dx
    return float(residual.abs().max())


def maximality_check_P(
    p: OCProblem,
    e: Extremal,
    box: Box,
    grid: int = MAXIMALITY_GRID,
    passes: int = MAXIMALITY_REFINE_PASSES,
) -> MaximalityReport:
    """Gap between the sampled sup over the box of H(t_i, x_i, ., psi0, psi_i) and H at u_i."""
    pair = e.pair
    lo, hi = box_bounds(box, p.r)
    controls = pair.u.cell_values()
    _check_in_box(controls, lo, hi)
    nodes, x, psi = pair.nodes, pair.x.values, e.psi.values

    candidate_values = hamiltonian_P_batch(p, PointBatch(nodes[:-1], x[:-1], controls), e.psi0, psi[:-1])
    worst: Optional[MaximalityReport] = None
    for i in range(pair.num_intervals):

        def objective(us: torch.Tensor, i: int = i) -> torch.Tensor:
            batch = PointBatch(nodes[i].repeat(us.shape[0]), x[i].repeat(us.shape[0], 1), us)
            return hamiltonian_P_batch(p, batch, e.psi0, psi[i], strict=False)

        sup_value, argmax = grid_supremum(objective, lo, hi, grid, passes)
        gap = sup_value - float(candidate_values[i])
        if worst is None or gap > worst.worst_gap:
            worst = MaximalityReport(
                worst_gap=gap,
                worst_node=i,
                argmax_found=tuple(argmax.tolist()),
                candidate=tuple(controls[i].tolist()),
                sup_value=sup_value,
                candidate_value=float(candidate_values[i]),
                box=list(zip(lo.tolist(), hi.tolist())),
                grid=grid,
            )
    logger.info(f"Maximality on '{p.name}': worst gap {worst.worst_gap:.3e} at node {worst.worst_node}")
    return worst


def lift_extremal(p: OCProblem, e: Extremal, profile: VProfile) -> TauExtremal:
    """p_z = psi(t(tau)) and p_t = -H along the pair, so the tau-Hamiltonian vanishes at every node."""
    quad = lift_to_tau(e.pair, profile)
    t = quad.t.values[:, 0]
    psi_at = e.psi.interp_linear(t)
    hamiltonian = hamiltonian_P_batch(p, PointBatch(t, quad.z.values, quad.w.values), e.psi0, psi_at)
    tau = quad.nodes
    return TauExtremal(
        quad=quad,
        p0=e.psi0,
        p_t=GridFn(tau, (-hamiltonian).reshape(-1, 1)),
        p_z=GridFn(tau, psi_at),
    )


def project_extremal(p: OCProblem, te: TauExtremal, num_nodes: Optional[int] = None) -> Extremal:
    pair = project_from_tau(te.quad, num_nodes)
    _, tau = projection_grid(te.quad, num_nodes)
    psi = te.p_z.interp_linear(tau)
    return Extremal(pair=pair, psi0=te.p0, psi=GridFn(pair.nodes, psi))


def tau_hamiltonian_nodes(p: OCProblem, te: TauExtremal) -> torch.Tensor:
    """The tau-Hamiltonian at every node, using the cell's v and w."""
    q = te.quad
    batch = PointBatch(q.t.values[:, 0], q.z.values, q.w.values)
    return hamiltonian_Ptau_batch(p, batch, q.v.values[:, 0], te.p0, te.p_t.values[:, 0], te.p_z.values)


def zero_level_max(p: OCProblem, te: TauExtremal) -> float:
    return float(tau_hamiltonian_nodes(p, te).abs().max())


def classify_abnormal(obj: Union[Extremal, TauExtremal]) -> bool:
    """True when the cost multiplier vanishes."""
    if isinstance(obj, Extremal):
        multiplier = obj.psi0
        rest = obj.psi.sup_norm()
    elif isinstance(obj, TauExtremal):
        multiplier = obj.p0
        rest = max(obj.p_t.sup_norm(), obj.p_z.sup_norm())
    else:
        raise TypeError(f"Expected an Extremal or TauExtremal, got {type(obj).__name__}")
    if multiplier == 0.0 and rest == 0.0:
        raise InvariantError("Multipliers must not vanish together")
    return multiplier == 0.0


def adjoint_residual_Ptau(p: OCProblem, te: TauExtremal) -> Dict:
    """Midpoint residuals of p_t' = -v dH/dt and p_z' = -v dH/dx on the tau-grid."""
    q = te.quad
    steps = q.t.steps.unsqueeze(1)
    t, z = q.t.values[:, 0], q.z.values
    v = q.v.cell_values()
    p_z = te.p_z.values
    mid = PointBatch(0.5 * (t[:-1] + t[1:]), 0.5 * (z[:-1] + z[1:]), q.w.cell_values())
    d_dt, d_dx = hamiltonian_x_gradient(p, mid, te.p0, 0.5 * (p_z[:-1] + p_z[1:]))
    p_t = te.p_t.values
    residual_t = (p_t[1:] - p_t[:-1]) / steps + v * d_dt.unsqueeze(1)
    residual_z = (p_z[1:] - p_z[:-1]) / steps + v * d_dx
    r_t, r_z = float(residual_t.abs().max()), float(residual_z.abs().max())
    return {"p_t": r_t, "p_z": r_z, "max": max(r_t, r_z)}


def maximality_check_Ptau(
    p: OCProblem,
    te: TauExtremal,
    box: Box,
    grid: int = MAXIMALITY_GRID,
    passes: int = MAXIMALITY_REFINE_PASSES,
) -> MaximalityReport:
    """Maximality over (v, w) in [0.5, 1.5] x box; the tau-Hamiltonian is linear in v so only the ends matter."""
    q = te.quad
    lo, hi = box_bounds(box, p.r)
    controls = q.w.cell_values()
    _check_in_box(controls, lo, hi)
    t, z, p_z = q.t.values[:, 0], q.z.values, te.p_z.values
    p_t = te.p_t.values[:, 0]
    speeds = q.v.cell_values()[:, 0]
    candidate_values = tau_hamiltonian_nodes(p, te)[:-1]

    worst: Optional[MaximalityReport] = None
    for j in range(q.num_intervals):

        def objective(ws: torch.Tensor, j: int = j) -> torch.Tensor:
            batch = PointBatch(t[j].repeat(ws.shape[0]), z[j].repeat(ws.shape[0], 1), ws)
            return hamiltonian_P_batch(p, batch, te.p0, p_z[j], strict=False)

        sup_h, argmax = grid_supremum(objective, lo, hi, grid, passes)
        level = sup_h + float(p_t[j])
        best_v = V_MAX if level >= 0 else V_MIN
        sup_value = level * best_v
        gap = sup_value - float(candidate_values[j])
        if worst is None or gap > worst.worst_gap:
            worst = MaximalityReport(
                worst_gap=gap,
                worst_node=j,
                argmax_found=(best_v, *argmax.tolist()),
                candidate=(float(speeds[j]), *controls[j].tolist()),
                sup_value=sup_value,
                candidate_value=float(candidate_values[j]),
                box=[(V_MIN, V_MAX)] + list(zip(lo.tolist(), hi.tolist())),
                grid=grid,
            )
    return worst


def verify_extremal(
    p: OCProblem,
    e: Extremal,
    box: Box,
    grid: int = MAXIMALITY_GRID,
    profiles: Optional[Dict[str, VProfile]] = None,
) -> Dict:
    """Adjoint residual, maximality gap and zero level of the lifted extremal under each profile."""
    maximality = maximality_check_P(p, e, box, grid)
    if profiles is None:
        profiles = {"identity": VProfile.identity(e.pair.x.a, e.pair.x.b, e.pair.num_intervals)}
    zero_levels = {}
    for name, profile in profiles.items():
        te = lift_extremal(p, e, profile)
        zero_levels[name] = {
            "hamiltonian_zero_level_max": zero_level_max(p, te),
            "adjoint_residual_Ptau": adjoint_residual_Ptau(p, te),
            "abnormal": classify_abnormal(te),
        }
    return {
        "adjoint_residual": adjoint_residual_P(p, e),
        "worst_gap": maximality.worst_gap,
        "maximality": maximality.to_dict(),
        "hamiltonian_zero_level_max": max(level["hamiltonian_zero_level_max"] for level in zero_levels.values()),
        "abnormal": classify_abnormal(e),
        "lifts": zero_levels,
    }
