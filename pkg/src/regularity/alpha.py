import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import torch
from torch.quasirandom import SobolEngine

from config.check_config import ALPHA_X_SAMPLES
from src.errors import InvariantError
from src.expr import PointBatch
from src.problem.costing import trapezoid
from src.problem.grid import DTYPE, GridFn
from src.problem.model import ENDPOINT_TOLERANCE, OCProblem, fix_control
from src.regularity.sampling import expand_box


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlphaReport:
    tau: List[float]
    alpha: List[float]
    integral: float
    lipschitz_max: float
    x_box: List[Tuple[float, float]]
    samples_per_node: int
    verdict: str

    def to_dict(self) -> Dict:
        return {"check": "alpha", **self.__dict__}


def x_samples(x_box: Sequence[Tuple[float, float]], count: int, seed: int) -> torch.Tensor:
    """Sobol points of the state box followed by its corners."""
    lo = torch.tensor([i[0] for i in x_box], dtype=DTYPE)
    hi = torch.tensor([i[1] for i in x_box], dtype=DTYPE)
    engine = SobolEngine(dimension=len(x_box), scramble=True, seed=seed)
    inner = lo + engine.draw(count, dtype=DTYPE) * (hi - lo)
    corners = torch.tensor(list(itertools.product(*x_box)), dtype=DTYPE).reshape(-1, len(x_box))
    return torch.cat([inner, corners])


def check_alpha_bound(
    p: OCProblem,
    w: GridFn,
    xbox,
    samples: int = ALPHA_X_SAMPLES,
    seed: int = 0,
) -> AlphaReport:
    """Sampled integrable bound on the state derivatives of L and phi along a frozen control.

    alpha(tau) is the largest max-norm of L_x and of every phi_i,x over the
    x-samples at (t = tau, x, w(tau)); the Lipschitz variant takes difference
    quotients between consecutive samples in the 1-norm.
    """
    fixed = fix_control(p, w)
    if abs(w.a - p.a) > ENDPOINT_TOLERANCE * max(1.0, abs(p.a)) or abs(w.b - p.b) > ENDPOINT_TOLERANCE * max(1.0, abs(p.b)):
        raise InvariantError(f"Frozen control lives on [{w.a}, {w.b}], problem on [{p.a}, {p.b}]")
    x_box = expand_box(xbox, p.n, "x")
    xs = x_samples(x_box, samples, seed)
    m, nodes = xs.shape[0], w.nodes
    controls = fixed.control_at(nodes)

    t = nodes.repeat_interleave(m)
    batch = PointBatch(t, xs.repeat(nodes.shape[0], 1), controls.repeat_interleave(m, dim=0))
    lagrangian = p.lagrangian_grad(batch)
    dynamics = p.dynamics_grad(batch)

    norms = [lagrangian.d_dx.abs().max(dim=1).values] + [g.d_dx.abs().max(dim=1).values for g in dynamics]
    alpha = torch.stack(norms, dim=1).max(dim=1).values.reshape(nodes.shape[0], m).max(dim=1).values

    values = torch.stack([lagrangian.value] + [g.value for g in dynamics], dim=1).reshape(nodes.shape[0], m, -1)
    dx = (xs[1:] - xs[:-1]).abs().sum(dim=1)
    moved = dx > 0
    quotients = (values[:, 1:] - values[:, :-1]).abs().max(dim=2).values[:, moved] / dx[moved]
    lipschitz = float(quotients.max()) if quotients.numel() else 0.0

    integral = trapezoid(w.steps, alpha[:-1], alpha[1:])
    verdict = "finite" if torch.isfinite(alpha).all() and abs(integral) < float("inf") else "infinite"
    logger.info(f"Alpha bound for '{p.name}': integral {integral:.6g}, Lipschitz max {lipschitz:.6g}, {verdict}")
    return AlphaReport(
        tau=nodes.tolist(),
        alpha=alpha.tolist(),
        integral=integral,
        lipschitz_max=lipschitz,
        x_box=[list(i) for i in x_box],
        samples_per_node=m,
        verdict=verdict,
    )
