"""Control-affinity of the dynamics and the growth hypothesis for control-affine problems.

For phi(t, x, u) = f(t, x) + g(t, x) u with g of full rank r the hypothesis reads,
for every state index i,

    (|L_t| + |L_xi| + |L phi_t - L_t phi| + |L phi_xi - L_xi phi|) |u|^mu <= gamma L^beta + eta

with gamma > 0, beta < 2 and mu >= max(beta - 2, -2). Derivative vectors use the
max-norm and |u| is Euclidean.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import torch

from config.check_config import (
    AFFINE_POINTS,
    AFFINE_STEP,
    AFFINE_THRESHOLD,
    BETA_GRID,
    EPSILON,
    MAX_SKIP_FRACTION,
    MU_GRID,
    RANK_TOLERANCE,
)
from src.errors import InvariantError, SamplingError
from src.expr import PointBatch
from src.problem.model import OCProblem
from src.regularity.fitting import fit_growth, max_violation
from src.regularity.growth import differentiate
from src.regularity.sampling import SampleBox, concat_batches


logger = logging.getLogger(__name__)


# gamma must stay positive even when the left-hand side vanishes.
GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class AffineFit:
    gamma: float
    beta: float
    eta: float
    mu: float

    @property
    def bound(self) -> float:
        return self.gamma + self.eta


@dataclass(frozen=True)
class AffineGrowthReport:
    box: Dict
    affine: bool
    witness: Optional[Dict]
    full_rank: Optional[bool]
    rank: Optional[Dict]
    fit: Optional[AffineFit]
    zeta: float
    skipped: int
    verdict: str

    def to_dict(self) -> Dict:
        return {"check": "affine", **self.__dict__}


def _shift(batch: PointBatch, du: torch.Tensor) -> PointBatch:
    return PointBatch(batch.t, batch.x, batch.u + du)


def probe_points(box: SampleBox) -> PointBatch:
    """A few Sobol points of the box plus its center."""
    return concat_batches([replace(box, count=AFFINE_POINTS).sample(), box.center()])


def affinity_witness(p: OCProblem, points: PointBatch, h: float) -> Optional[Dict]:
    """Largest second difference of phi in u, or None when every one is below the threshold."""
    eye = torch.eye(p.r, dtype=points.u.dtype) * h
    base = p.dynamics(points)
    worst: Optional[Dict] = None
    worst_excess = 0.0
    for j in range(p.r):
        at_j = p.dynamics(_shift(points, eye[j]))
        for l in range(j, p.r):
            at_l = p.dynamics(_shift(points, eye[l]))
            at_jl = p.dynamics(_shift(points, eye[j] + eye[l]))
            second = at_jl - at_j - at_l + base
            scale = torch.stack([at_jl.abs(), at_j.abs(), at_l.abs(), base.abs()]).max(dim=0).values
            excess = second.abs() / (AFFINE_THRESHOLD * torch.clamp(scale, min=1.0))
            flat = int(torch.argmax(excess))
            point_index, component = divmod(flat, p.n)
            value = float(excess[point_index, component])
            if value > 1.0 and value > worst_excess:
                worst_excess = value
                worst = {
                    "component": component + 1,
                    "u_indices": [j + 1, l + 1],
                    "point": str(points.point(point_index)),
                    "second_difference": float(second[point_index, component]),
                    "second_derivative": float(second[point_index, component]) / (h * h),
                }
    return worst


def rank_check(p: OCProblem, points: PointBatch, h: float) -> Tuple[bool, Dict]:
    """Columns of g by forward differences and their singular values at every probe point."""
    base = p.dynamics(points)
    columns = [(p.dynamics(_shift(points, torch.eye(p.r, dtype=base.dtype)[j] * h)) - base) / h for j in range(p.r)]
    g = torch.stack(columns, dim=2)
    sigma = torch.linalg.svdvals(g)
    sigma_min, sigma_max = sigma[:, -1], sigma[:, 0]
    deficient = sigma_min <= RANK_TOLERANCE * torch.clamp(sigma_max, min=1.0)
    index = int(torch.argmin(sigma_min / torch.clamp(sigma_max, min=1.0)))
    full_rank = p.n >= p.r and not bool(deficient.any())
    return full_rank, {
        "min_singular": float(sigma_min.min()),
        "max_singular": float(sigma_max.max()),
        "deficient_points": int(deficient.sum()),
        "worst_point": str(points.point(index)),
        "n_at_least_r": p.n >= p.r,
    }


def affine_growth_terms(p: OCProblem, batch: PointBatch) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Bracket max_i(...), L, |u| and the validity mask at every sample."""
    lagrangian, dynamics, valid = differentiate(p, batch)
    L = lagrangian.value.unsqueeze(1)
    phi = torch.stack([g.value for g in dynamics], dim=1)
    phi_t = torch.stack([g.d_dt for g in dynamics], dim=1)
    # phi_x[b, k, i] = d phi_k / d x_i
    phi_x = torch.stack([g.d_dx for g in dynamics], dim=1)
    time_term = lagrangian.d_dt.abs() + (L * phi_t - lagrangian.d_dt.unsqueeze(1) * phi).abs().max(dim=1).values
    brackets = []
    for i in range(p.n):
        L_xi = lagrangian.d_dx[:, i].unsqueeze(1)
        cross = (L * phi_x[:, :, i] - L_xi * phi).abs().max(dim=1).values
        brackets.append(time_term + L_xi[:, 0].abs() + cross)
    bracket = torch.stack(brackets, dim=1).max(dim=1).values
    radius = torch.linalg.vector_norm(batch.u, dim=1)
    return bracket, lagrangian.value, radius, valid


def _grid() -> List[Tuple[float, float]]:
    return [(beta, mu) for beta in BETA_GRID for mu in MU_GRID if beta < 2.0 and mu >= max(beta - 2.0, -2.0)]


def _sides(bracket, L, radius, beta: float, mu: float) -> Tuple[torch.Tensor, torch.Tensor]:
    return bracket * radius.pow(mu), torch.clamp(L, min=EPSILON).pow(beta)


def fit_affine_growth(bracket: torch.Tensor, L: torch.Tensor, radius: torch.Tensor, batch: PointBatch) -> AffineFit:
    best: Optional[AffineFit] = None
    for beta, mu in _grid():
        lhs, rhs = _sides(bracket, L, radius, beta, mu)
        fit = fit_growth(f"beta={beta},mu={mu}", lhs, rhs, batch)
        candidate = AffineFit(gamma=max(fit.c, GAMMA_FLOOR), beta=beta, eta=fit.k, mu=mu)
        if best is None or candidate.bound < best.bound:
            best = candidate
    return best


def check_affine(p: OCProblem, box: SampleBox) -> AffineGrowthReport:
    """Decide phi = f + g u numerically, test the rank of g and fit (gamma, beta, eta, mu)."""
    if box.n != p.n or box.r != p.r:
        raise InvariantError(f"Sample box dimensions (n={box.n}, r={box.r}) do not match problem (n={p.n}, r={p.r})")
    lo, hi = box.u_bounds()
    h = AFFINE_STEP * max(1.0, float((0.5 * (hi - lo)).max()))
    points = probe_points(box)
    witness = affinity_witness(p, points, h)
    affine = witness is None

    samples = box.sample()
    bracket, L, radius, valid = affine_growth_terms(p, samples)
    skipped = int((~valid).sum())
    if skipped > MAX_SKIP_FRACTION * len(samples):
        raise SamplingError(f"{skipped} of {len(samples)} sample points are non-differentiable (limit {MAX_SKIP_FRACTION:.0%})")
    keep = valid & (radius > EPSILON)
    zeta = float(L[valid].min())

    full_rank, rank, fit = None, None, None
    if affine:
        full_rank, rank = rank_check(p, points, h)
        fit = fit_affine_growth(bracket[keep], L[keep], radius[keep], samples.select(keep))
    else:
        logger.info(f"Dynamics of '{p.name}' are not affine in u: {witness}")

    verdict = "applicable" if affine and full_rank and fit is not None else "inapplicable"
    logger.info(f"Control-affine growth hypothesis for '{p.name}': {verdict}")
    return AffineGrowthReport(
        box=box.describe(),
        affine=affine,
        witness=witness,
        full_rank=full_rank,
        rank=rank,
        fit=fit,
        zeta=zeta,
        skipped=skipped,
        verdict=verdict,
    )


def recheck_affine(p: OCProblem, report: AffineGrowthReport, box: SampleBox) -> float:
    """Max violation of the fitted (gamma, beta, eta, mu) on ``box``, e.g. drawn with a fresh seed."""
    if report.fit is None:
        raise InvariantError("Report carries no fitted parameters")
    bracket, L, radius, valid = affine_growth_terms(p, box.sample())
    keep = valid & (radius > EPSILON)
    lhs, rhs = _sides(bracket[keep], L[keep], radius[keep], report.fit.beta, report.fit.mu)
    return max_violation(lhs, rhs, report.fit.gamma, report.fit.eta)
