"""Max-ratio fits of inequalities lhs <= c * rhs + k over sampled points."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import torch

from config.check_config import CERTIFY_TOLERANCE, EPSILON, GROWTH_TOLERANCE, K_GRID
from src.expr import Point, PointBatch


logger = logging.getLogger(__name__)


# Ties in c + k within this relative slack go to the smaller c.
TIE_TOLERANCE = 1e-6


def fit_c(lhs: torch.Tensor, rhs: torch.Tensor, k: float) -> float:
    excess = torch.clamp(lhs - k, min=0.0)
    return float(torch.max(excess / torch.clamp(rhs, min=EPSILON)))


def certify_tolerance(c: float, rhs: torch.Tensor, k: float) -> torch.Tensor:
    return CERTIFY_TOLERANCE * torch.clamp(c * rhs + k, min=1.0)


def max_violation(lhs: torch.Tensor, rhs: torch.Tensor, c: float, k: float) -> float:
    """Largest lhs - (c * rhs + k) over the samples; <= 0 means certified."""
    if lhs.numel() == 0:
        return float("-inf")
    return float(torch.max(lhs - (c * rhs + k)))


@dataclass(frozen=True, eq=False)
class ConditionFit:
    """Best (c, k) for one inequality on one sample set."""

    name: str
    c: float
    k: float
    max_ratio: float
    witness: Optional[Point]
    lhs: torch.Tensor = field(repr=False)
    rhs: torch.Tensor = field(repr=False)

    @property
    def bound(self) -> float:
        return self.c + self.k

    def certifies(self, c: float, k: float) -> bool:
        """True when lhs <= c * rhs + k holds at every fitted sample."""
        slack = self.lhs - (c * self.rhs + k)
        return bool(torch.all(slack <= certify_tolerance(c, self.rhs, k)))

    def to_dict(self) -> Dict:
        return {
            "c": self.c,
            "k": self.k,
            "max_ratio": self.max_ratio,
            "witness": None if self.witness is None else str(self.witness),
            "samples": int(self.lhs.numel()),
        }


def fit_growth(
    name: str,
    lhs: torch.Tensor,
    rhs: torch.Tensor,
    batch: PointBatch,
    k_grid: Sequence[float] = K_GRID,
) -> ConditionFit:
    """Smallest c + k over the k-grid plus the box bound (c = 0, k = max lhs)."""
    if lhs.numel() == 0:
        raise ValueError(f"No samples to fit condition '{name}'")
    k_box = float(torch.max(lhs))
    candidates = [(fit_c(lhs, rhs, float(k)), float(k)) for k in k_grid]
    candidates.append((0.0, max(k_box, 0.0)))

    best_c, best_k = candidates[0]
    for c, k in candidates[1:]:
        total, best_total = c + k, best_c + best_k
        if total < best_total * (1.0 - TIE_TOLERANCE):
            best_c, best_k = c, k
        elif total <= best_total * (1.0 + TIE_TOLERANCE) and c < best_c:
            best_c, best_k = c, k

    ratios = lhs / torch.clamp(rhs, min=EPSILON)
    index = int(torch.argmax(ratios))
    return ConditionFit(
        name=name,
        c=best_c,
        k=best_k,
        max_ratio=float(ratios[index]),
        witness=batch.point(index),
        lhs=lhs,
        rhs=rhs,
    )


def escalation_verdict(levels: List[ConditionFit]) -> str:
    """"suspect" when c + k grows by more than the tolerance between the first and last level."""
    base, final = levels[0].bound, levels[-1].bound
    if final > (1.0 + GROWTH_TOLERANCE) * base and final - base > EPSILON:
        logger.warning(f"Condition '{levels[0].name}' grows under escalation: {base:.6g} -> {final:.6g}")
        return "suspect"
    return "satisfied-on-box"
