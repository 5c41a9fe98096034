import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import torch

from config.check_config import DEFAULT_SHELLS, EPSILON, ESCALATION_FACTORS, GROWTH_TOLERANCE, MIN_SHELLS
from src.errors import InvariantError
from src.expr import PointBatch
from src.problem.model import OCProblem
from src.regularity.sampling import SampleBox, concat_batches


logger = logging.getLogger(__name__)


# theta(r)/r must rise by this relative amount across the top half of the shells.
RATIO_RISE = 1e-3


@dataclass(frozen=True)
class Shell:
    r_lo: float
    r_hi: float
    count: int
    theta: Optional[float]
    r_at_min: Optional[float]
    linear_ratio: Optional[float]
    quadratic_ratio: Optional[float]


@dataclass(frozen=True)
class CoercivityLevel:
    factor: float
    samples: int
    min_theta: float
    top_half_ratios: List[float]
    edge_min_phi: float


@dataclass(frozen=True)
class CoercivityReport:
    box: Dict
    shells: List[Shell]
    empty_shells: int
    min_theta: float
    levels: List[CoercivityLevel]
    bounded_below: bool
    ratio_increasing: bool
    phi_grows_at_edge: bool
    verdict: str

    def to_dict(self) -> Dict:
        return {"check": "coercivity", **self.__dict__}


def _ratio(numerator: float, denominator: Optional[float]) -> Optional[float]:
    if denominator is None or denominator < EPSILON:
        return None
    return numerator / denominator


def envelope(lagrangian: torch.Tensor, radius: torch.Tensor, shells: int) -> List[Shell]:
    """Lower envelope of L over equal-count shells of |phi|."""
    order = torch.argsort(radius, stable=True)
    result = []
    for chunk in torch.tensor_split(order, shells):
        if chunk.numel() == 0:
            result.append(Shell(float("nan"), float("nan"), 0, None, None, None, None))
            continue
        values = lagrangian[chunk]
        index = int(chunk[int(torch.argmin(values))])
        theta, r = float(lagrangian[index]), float(radius[index])
        result.append(
            Shell(
                r_lo=float(radius[chunk[0]]),
                r_hi=float(radius[chunk[-1]]),
                count=int(chunk.numel()),
                theta=theta,
                r_at_min=r,
                linear_ratio=_ratio(theta, r),
                quadratic_ratio=_ratio(theta, None if r < EPSILON else r * r),
            )
        )
    return result


def edge_projection(batch: PointBatch, box: SampleBox) -> PointBatch:
    """Samples with u pushed radially from the u-box center onto its boundary."""
    lo, hi = box.u_bounds()
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    offset = batch.u - center
    reach = (offset.abs() / half).max(dim=1).values
    keep = reach > EPSILON
    u = center + offset[keep] / reach[keep].unsqueeze(1)
    return PointBatch(batch.t[keep], batch.x[keep], u)


def _top_half_ratios(shells: List[Shell]) -> List[float]:
    top = shells[len(shells) // 2 :]
    return [s.linear_ratio for s in top if s.linear_ratio is not None]


def check_coercivity(p: OCProblem, box: SampleBox, shells: int = DEFAULT_SHELLS) -> CoercivityReport:
    """L against theta(|phi|): bounded below, superlinear, and |phi| unbounded at the control edge."""
    if shells < MIN_SHELLS:
        raise InvariantError(f"Coercivity needs at least {MIN_SHELLS} shells, got {shells}")
    if box.n != p.n or box.r != p.r:
        raise InvariantError(f"Sample box dimensions (n={box.n}, r={box.r}) do not match problem (n={p.n}, r={p.r})")

    batches: List[PointBatch] = []
    levels: List[CoercivityLevel] = []
    base_shells: List[Shell] = []
    final_shells: List[Shell] = []
    for factor in ESCALATION_FACTORS:
        scaled = box.scaled(factor)
        batches.append(scaled.sample())
        union = concat_batches(batches)
        lagrangian = p.lagrangian(union)
        radius = torch.linalg.vector_norm(p.dynamics(union), dim=1)
        final_shells = envelope(lagrangian, radius, shells)
        if not base_shells:
            base_shells = final_shells

        edge = edge_projection(batches[-1], scaled)
        edge_phi = torch.linalg.vector_norm(p.dynamics(edge), dim=1)
        levels.append(
            CoercivityLevel(
                factor=float(factor),
                samples=len(union),
                min_theta=float(lagrangian.min()),
                top_half_ratios=_top_half_ratios(final_shells),
                edge_min_phi=float(edge_phi.min()) if edge_phi.numel() else float("nan"),
            )
        )

    empty = sum(1 for s in base_shells if s.count == 0)
    if empty:
        logger.warning(f"{empty} of {shells} coercivity shells are empty")

    base, final = levels[0], levels[-1]
    bounded_below = base.min_theta - final.min_theta <= GROWTH_TOLERANCE * max(1.0, abs(base.min_theta))
    ratios = _top_half_ratios(final_shells)
    ratio_increasing = len(ratios) >= 2 and ratios[-1] > ratios[0] + RATIO_RISE * max(1.0, abs(ratios[0]))
    phi_grows = final.edge_min_phi > 0.0 and final.edge_min_phi > (1.0 + GROWTH_TOLERANCE) * base.edge_min_phi
    verdict = "pass" if bounded_below and ratio_increasing and phi_grows else "fail"
    logger.info(
        f"Coercivity on '{p.name}': {verdict} (bounded below {bounded_below}, "
        f"superlinear {ratio_increasing}, edge growth {phi_grows})"
    )
    return CoercivityReport(
        box=box.describe(),
        shells=base_shells,
        empty_shells=empty,
        min_theta=base.min_theta,
        levels=levels,
        bounded_below=bounded_below,
        ratio_increasing=ratio_increasing,
        phi_grows_at_edge=phi_grows,
        verdict=verdict,
    )
