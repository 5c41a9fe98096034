"""Hamiltonians of the original and the reparameterized problem.

H(t, x, u, psi0, psi) = psi0 L(t, x, u) + psi . phi(t, x, u) and the tau-form
(p0 L(t, z, w) + p_t + p_z . phi(t, z, w)) v, which is computed as
(H(t, z, w, p0, p_z) + p_t) v so that both sides of the relation come from
one code path.
"""

from typing import Sequence, Tuple

import torch

from config.check_config import V_MAX, V_MIN
from src.errors import InvariantError
from src.expr import Expr, Point, PointBatch
from src.expr.nodes import Add, Mul, Node, Num, Var
from src.problem.grid import as_tensor
from src.problem.model import OCProblem


def _check_speed(v: torch.Tensor) -> None:
    if bool((v < V_MIN).any() or (v > V_MAX).any()):
        raise InvariantError(f"v must stay within [{V_MIN}, {V_MAX}], got range [{float(v.min())}, {float(v.max())}]")


def hamiltonian_P_batch(p: OCProblem, batch: PointBatch, psi0: float, psi: torch.Tensor, strict: bool = True) -> torch.Tensor:
    psi = as_tensor(psi).reshape(-1, p.n).expand(len(batch), p.n)
    return float(psi0) * p.lagrangian(batch, strict=strict) + torch.sum(psi * p.dynamics(batch, strict=strict), dim=1)


def hamiltonian_Ptau_batch(
    p: OCProblem,
    batch: PointBatch,
    v: torch.Tensor,
    p0: float,
    p_t: torch.Tensor,
    p_z: torch.Tensor,
    strict: bool = True,
) -> torch.Tensor:
    v = as_tensor(v).reshape(-1).expand(len(batch))
    _check_speed(v)
    p_t = as_tensor(p_t).reshape(-1).expand(len(batch))
    return (hamiltonian_P_batch(p, batch, p0, p_z, strict=strict) + p_t) * v


def hamiltonian_P(p: OCProblem, t: float, x: Sequence[float], u: Sequence[float], psi0: float, psi: Sequence[float]) -> float:
    batch = Point(t, tuple(x), tuple(u)).as_batch()
    return float(hamiltonian_P_batch(p, batch, psi0, as_tensor(list(psi)))[0])


def hamiltonian_Ptau(
    p: OCProblem,
    t: float,
    z: Sequence[float],
    v: float,
    w: Sequence[float],
    p0: float,
    p_t: float,
    p_z: Sequence[float],
) -> float:
    batch = Point(t, tuple(z), tuple(w)).as_batch()
    value = hamiltonian_Ptau_batch(p, batch, as_tensor(float(v)), p0, as_tensor(float(p_t)), as_tensor(list(p_z)))
    return float(value[0])


def hamiltonian_x_gradient(
    p: OCProblem, batch: PointBatch, psi0: float, psi: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """dH/dt [B] and dH/dx [B, n] with psi given per point."""
    psi = as_tensor(psi).reshape(-1, p.n).expand(len(batch), p.n)
    lagrangian = p.lagrangian_grad(batch)
    d_dt = float(psi0) * lagrangian.d_dt
    d_dx = float(psi0) * lagrangian.d_dx
    for i, component in enumerate(p.dynamics_grad(batch)):
        d_dt = d_dt + psi[:, i] * component.d_dt
        d_dx = d_dx + psi[:, i : i + 1] * component.d_dx
    return d_dt, d_dx


def _scaled(coefficient: float, root: Node) -> Node:
    return Mul(Num(float(coefficient)), root)


def hamiltonian_expr(p: OCProblem, psi0: float, psi: Sequence[float]) -> Expr:
    """H with frozen multipliers as an expression over (t, x, u)."""
    if len(psi) != p.n:
        raise InvariantError(f"psi has {len(psi)} entries, expected n={p.n}")
    root: Node = _scaled(psi0, p.L.root)
    for coefficient, component in zip(psi, p.phi):
        root = Add(root, _scaled(coefficient, component.root))
    return Expr(root, p.n, p.r)


def tau_hamiltonian_expr(p: OCProblem, p0: float, p_t: float, p_z: Sequence[float]) -> Expr:
    """The tau-Hamiltonian as an expression over (t, x1..xn, x_{n+1}, u); x_{n+1} carries v."""
    if len(p_z) != p.n:
        raise InvariantError(f"p_z has {len(p_z)} entries, expected n={p.n}")
    inner: Node = Add(_scaled(p0, p.L.root), Num(float(p_t)))
    for coefficient, component in zip(p_z, p.phi):
        inner = Add(inner, _scaled(coefficient, component.root))
    return Expr(Mul(inner, Var("x", p.n + 1)), p.n + 1, p.r)


def tau_point(t: float, z: Sequence[float], v: float, w: Sequence[float]) -> Point:
    """Point for ``tau_hamiltonian_expr``: v is appended to the state."""
    return Point(t, tuple(z) + (float(v),), tuple(w))
