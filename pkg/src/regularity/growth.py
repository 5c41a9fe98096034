"""Growth conditions of Tonelli-Morrey type, fitted on sampled boxes.

Every condition has the shape lhs(t, x, u) <= c * rhs(t, x, u) + k. The fit is
made on the base box and then repeated with the u-box (and the sample count)
scaled by each escalation factor; the sample sets of the levels accumulate.
A condition whose c + k keeps growing with the box is reported as "suspect".
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import torch

from config.check_config import ESCALATION_FACTORS, MAX_SKIP_FRACTION
from src.errors import InvariantError, SamplingError
from src.expr import PointBatch
from src.problem.model import OCProblem
from src.regularity.fitting import ConditionFit, escalation_verdict, fit_growth, max_violation
from src.regularity.sampling import SampleBox, concat_batches


logger = logging.getLogger(__name__)


Conditions = Dict[str, Tuple[torch.Tensor, torch.Tensor]]
ConditionBuilder = Callable[[OCProblem, PointBatch], Tuple[Conditions, torch.Tensor]]


def _sup(values: torch.Tensor) -> torch.Tensor:
    return values.abs().max(dim=1).values


def differentiate(p: OCProblem, batch: PointBatch):
    """Gradients of L and phi plus the mask of points where all of them exist.

    Values are evaluated strictly first so that domain errors surface with
    their point; kinks of the derivative only mark the point as skipped.
    """
    p.lagrangian(batch, strict=True)
    p.dynamics(batch, strict=True)
    lagrangian = p.lagrangian_grad(batch, strict=False)
    dynamics = p.dynamics_grad(batch, strict=False)
    valid = lagrangian.valid.clone()
    for component in dynamics:
        valid &= component.valid
    return lagrangian, dynamics, valid


def theorem53_conditions(p: OCProblem, batch: PointBatch) -> Tuple[Conditions, torch.Tensor]:
    lagrangian, dynamics, valid = differentiate(p, batch)
    phi_values = torch.stack([g.value for g in dynamics], dim=1)
    phi_dt = torch.stack([g.d_dt for g in dynamics], dim=1)
    conditions: Conditions = {
        "dL_dt": (lagrangian.d_dt.abs(), lagrangian.value.abs()),
        "dL_dx": (_sup(lagrangian.d_dx), lagrangian.value.abs()),
        "dphi_dt": (_sup(phi_dt), _sup(phi_values)),
    }
    for i, component in enumerate(dynamics, start=1):
        conditions[f"dphi{i}_dx"] = (_sup(component.d_dx), component.value.abs())
    return conditions, valid


def tonelli_morrey_cv_conditions(p: OCProblem, batch: PointBatch) -> Tuple[Conditions, torch.Tensor]:
    lagrangian, _, valid = differentiate(p, batch)
    lhs = _sup(lagrangian.d_dx) + _sup(lagrangian.d_du)
    return {"dL_dx_plus_dL_du": (lhs, lagrangian.value.abs())}, valid


@dataclass(frozen=True, eq=False)
class ConditionReport:
    fit: ConditionFit
    levels: List[ConditionFit] = field(repr=False)
    factors: Tuple[float, ...]
    verdict: str

    def to_dict(self) -> Dict:
        return {
            **self.fit.to_dict(),
            "verdict": self.verdict,
            "escalation": [
                {"factor": factor, "c": level.c, "k": level.k, "max_ratio": level.max_ratio, "samples": int(level.lhs.numel())}
                for factor, level in zip(self.factors, self.levels)
            ],
        }


@dataclass(frozen=True, eq=False)
class GrowthReport:
    mode: str
    box: SampleBox
    conditions: Dict[str, ConditionReport]
    skipped: int
    sampled: int
    verdict: str

    def certifies(self, name: str, c: float, k: float) -> bool:
        """Whether (c, k) bounds condition ``name`` at every point of the base sample set."""
        if name not in self.conditions:
            raise KeyError(f"Unknown condition '{name}', available: {sorted(self.conditions)}")
        return self.conditions[name].fit.certifies(c, k)

    @property
    def tonelli_morrey_pair(self) -> str:
        """Verdict on the dL/dx and dphi_i/dx lines alone."""
        names = [name for name in self.conditions if name == "dL_dx" or (name.startswith("dphi") and name.endswith("_dx"))]
        if not names:
            return "not-applicable"
        if all(self.conditions[name].verdict == "satisfied-on-box" for name in names):
            return "satisfied-on-box"
        return "suspect"

    def to_dict(self) -> Dict:
        report = {
            "check": "growth",
            "mode": self.mode,
            "box": self.box.describe(),
            "conditions": {name: condition.to_dict() for name, condition in self.conditions.items()},
            "sampled": self.sampled,
            "skipped": self.skipped,
            "verdict": self.verdict,
        }
        if self.mode == "theorem53":
            report["tonelli_morrey_pair"] = self.tonelli_morrey_pair
        return report


def _run(p: OCProblem, box: SampleBox, mode: str, builder: ConditionBuilder) -> GrowthReport:
    if box.n != p.n or box.r != p.r:
        raise InvariantError(f"Sample box dimensions (n={box.n}, r={box.r}) do not match problem (n={p.n}, r={p.r})")
    batches: List[PointBatch] = []
    per_level: Dict[str, List[ConditionFit]] = {}
    skipped, sampled = 0, 0

    for factor in ESCALATION_FACTORS:
        batch = box.scaled(factor).sample()
        conditions, valid = builder(p, batch)
        skipped += int((~valid).sum())
        sampled += len(batch)
        if skipped > MAX_SKIP_FRACTION * sampled:
            raise SamplingError(f"{skipped} of {sampled} sample points are non-differentiable (limit {MAX_SKIP_FRACTION:.0%})")
        batches.append(batch.select(valid))
        union = concat_batches(batches)
        # Rebuilding on the union keeps the fitted samples and witnesses in level order.
        union_conditions, _ = builder(p, union)
        for name, (lhs, rhs) in union_conditions.items():
            per_level.setdefault(name, []).append(fit_growth(name, lhs, rhs, union))

    if skipped:
        logger.warning(f"Skipped {skipped} of {sampled} non-differentiable sample points")

    reports = {
        name: ConditionReport(fit=levels[0], levels=levels, factors=tuple(ESCALATION_FACTORS), verdict=escalation_verdict(levels))
        for name, levels in per_level.items()
    }
    verdict = "satisfied-on-box" if all(r.verdict == "satisfied-on-box" for r in reports.values()) else "suspect"
    logger.info(f"Growth check ({mode}) on '{p.name}': {verdict}")
    return GrowthReport(mode=mode, box=box, conditions=reports, skipped=skipped, sampled=sampled, verdict=verdict)


def check_growth_theorem53(p: OCProblem, box: SampleBox) -> GrowthReport:
    """|L_t|, max|L_x|, max|phi_t| and max|d phi_i/dx| against c|.| + k on the box."""
    return _run(p, box, "theorem53", theorem53_conditions)


def check_growth_tonelli_morrey_cv(p: OCProblem, box: SampleBox) -> GrowthReport:
    """max|L_x| + max|L_u| <= c|L| + k for problems with phi = u."""
    if not p.is_calculus_of_variations():
        raise InvariantError(f"Problem '{p.name}' is not of calculus-of-variations form (phi_i = u_i required)")
    return _run(p, box, "tonelli_morrey_cv", tonelli_morrey_cv_conditions)


def recheck_growth(p: OCProblem, report: GrowthReport, seed: int) -> Dict[str, float]:
    """Max violation of each reported (c, k) on the base box drawn with another seed."""
    builder = theorem53_conditions if report.mode == "theorem53" else tonelli_morrey_cv_conditions
    batch = report.box.with_seed(seed).sample()
    conditions, valid = builder(p, batch)
    return {
        name: max_violation(lhs[valid], rhs[valid], report.conditions[name].fit.c, report.conditions[name].fit.k)
        for name, (lhs, rhs) in conditions.items()
    }
