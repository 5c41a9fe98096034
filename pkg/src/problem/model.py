"""Data model for the Lagrange problem, its reparameterization and fixed-control variant."""

from dataclasses import dataclass
from typing import List, Tuple

import torch

from config.check_config import V_MAX, V_MIN
from src.errors import InvariantError
from src.expr import BatchGradient, Expr, PointBatch, evaluate_batch, grad_batch
from src.expr.nodes import Var
from src.problem.grid import DTYPE, GridFn, as_tensor


# Relative slack on endpoint and integral equalities of discretized objects.
ENDPOINT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class OCProblem:
    """Minimize the integral of L(t, x, u) over [a, b] subject to x' = phi(t, x, u), x(a) = A, x(b) = B."""

    name: str
    a: float
    b: float
    A: Tuple[float, ...]
    B: Tuple[float, ...]
    L: Expr
    phi: Tuple[Expr, ...]
    n: int
    r: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", tuple(float(v) for v in self.A))
        object.__setattr__(self, "B", tuple(float(v) for v in self.B))
        object.__setattr__(self, "phi", tuple(self.phi))
        if not float(self.a) < float(self.b):
            raise InvariantError(f"Interval requires a < b, got a={self.a}, b={self.b}")
        if self.n < 1 or self.r < 1:
            raise InvariantError(f"Dimensions must be >= 1, got n={self.n}, r={self.r}")
        if len(self.A) != self.n or len(self.B) != self.n or len(self.phi) != self.n:
            raise InvariantError(
                f"Expected n={self.n} entries in A, B and phi, got {len(self.A)}, {len(self.B)}, {len(self.phi)}"
            )
        for expr in (self.L, *self.phi):
            if expr.n != self.n or expr.r != self.r:
                raise InvariantError("Expressions must be declared over the problem dimensions")

    @property
    def A_tensor(self) -> torch.Tensor:
        return torch.tensor(self.A, dtype=DTYPE)

    @property
    def B_tensor(self) -> torch.Tensor:
        return torch.tensor(self.B, dtype=DTYPE)

    def lagrangian(self, batch: PointBatch, strict: bool = True) -> torch.Tensor:
        return evaluate_batch(self.L, batch, strict=strict).values

    def dynamics(self, batch: PointBatch, strict: bool = True) -> torch.Tensor:
        """phi at every point of ``batch`` as a ``[B, n]`` tensor."""
        return torch.stack([evaluate_batch(e, batch, strict=strict).values for e in self.phi], dim=1)

    def lagrangian_grad(self, batch: PointBatch, strict: bool = True) -> BatchGradient:
        return grad_batch(self.L, batch, strict=strict)

    def dynamics_grad(self, batch: PointBatch, strict: bool = True) -> List[BatchGradient]:
        return [grad_batch(e, batch, strict=strict) for e in self.phi]

    def is_calculus_of_variations(self) -> bool:
        """True when n == r and phi_i is literally the control u_i."""
        if self.n != self.r:
            return False
        return all(e.root == Var("u", i + 1) for i, e in enumerate(self.phi))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "r": self.r,
            "a": float(self.a),
            "b": float(self.b),
            "A": list(self.A),
            "B": list(self.B),
            "L": self.L.serialize(),
            "phi": [e.serialize() for e in self.phi],
        }


@dataclass(frozen=True, eq=False)
class AdmissiblePair:
    """State x (piecewise-linear) and control u (piecewise-constant, left value) on one grid."""

    x: GridFn
    u: GridFn

    def __post_init__(self) -> None:
        if self.x.nodes.shape != self.u.nodes.shape or not torch.equal(self.x.nodes, self.u.nodes):
            raise InvariantError("State and control must share one grid")

    @property
    def nodes(self) -> torch.Tensor:
        return self.x.nodes

    @property
    def num_intervals(self) -> int:
        return self.x.num_intervals

    def check_dims(self, n: int, r: int) -> None:
        if self.x.dim != n or self.u.dim != r:
            raise InvariantError(f"Pair has dimensions (n={self.x.dim}, r={self.u.dim}), problem expects (n={n}, r={r})")

    def control_sup_norm(self) -> float:
        """max_i of the Euclidean norm of u on each interval."""
        return float(torch.linalg.vector_norm(self.u.cell_values(), dim=1).max())


@dataclass(frozen=True, eq=False)
class TauQuadruple:
    """(t, z, v, w) on a common tau-grid; t and z piecewise-linear, v and w piecewise-constant."""

    t: GridFn
    z: GridFn
    v: GridFn
    w: GridFn

    def __post_init__(self) -> None:
        nodes = self.t.nodes
        for name in ("z", "v", "w"):
            if not torch.equal(getattr(self, name).nodes, nodes):
                raise InvariantError(f"Component {name} is not on the tau-grid of t")
        if self.t.dim != 1 or self.v.dim != 1:
            raise InvariantError("t and v must be scalar grid functions")
        v_cells = self.v.cell_values()
        if bool((v_cells < V_MIN).any() or (v_cells > V_MAX).any()):
            worst = float(v_cells.min()) if bool((v_cells < V_MIN).any()) else float(v_cells.max())
            raise InvariantError(f"v must stay within [{V_MIN}, {V_MAX}], found {worst}")
        t_values = self.t.values[:, 0]
        if not bool(torch.all(t_values[1:] > t_values[:-1])):
            raise InvariantError("t must be strictly increasing")
        scale = max(1.0, abs(self.t.a), abs(self.t.b))
        if abs(float(t_values[0]) - self.t.a) > ENDPOINT_TOLERANCE * scale:
            raise InvariantError(f"t(a) must equal a={self.t.a}, got {float(t_values[0])}")
        if abs(float(t_values[-1]) - self.t.b) > ENDPOINT_TOLERANCE * scale:
            raise InvariantError(f"t(b) must equal b={self.t.b}, got {float(t_values[-1])}")

    @property
    def nodes(self) -> torch.Tensor:
        return self.t.nodes

    @property
    def num_intervals(self) -> int:
        return self.t.num_intervals

    def v_integral(self) -> float:
        return float(torch.sum(self.t.steps * self.v.cell_values()[:, 0]))


@dataclass(frozen=True, eq=False)
class FixedControlProblem:
    """Problem with the control frozen to ``w``; only (t, z, v) remain free.

    F(tau, t, z, v) = L(t, z, w(tau)) * v and f(tau, t, z, v) = phi(t, z, w(tau)) * v.
    """

    base: OCProblem
    w: GridFn

    def control_at(self, tau: torch.Tensor) -> torch.Tensor:
        return self.w.lookup_left(as_tensor(tau))

    def _batch(self, tau, t, z) -> PointBatch:
        tau = as_tensor(tau)
        t = as_tensor(t).reshape(-1)
        z = as_tensor(z).reshape(t.shape[0], self.base.n)
        return PointBatch(t, z, self.control_at(tau).reshape(t.shape[0], self.base.r))

    def F(self, tau, t, z, v) -> torch.Tensor:
        return self.base.lagrangian(self._batch(tau, t, z)) * as_tensor(v).reshape(-1)

    def f(self, tau, t, z, v) -> torch.Tensor:
        return self.base.dynamics(self._batch(tau, t, z)) * as_tensor(v).reshape(-1, 1)


def fix_control(p: OCProblem, w: GridFn) -> FixedControlProblem:
    if w.dim != p.r:
        raise InvariantError(f"Frozen control has dimension {w.dim}, problem expects r={p.r}")
    if not bool(torch.isfinite(w.values).all()):
        raise InvariantError("Frozen control must be finite")
    return FixedControlProblem(base=p, w=w)
