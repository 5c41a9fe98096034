"""Batched evaluation and forward-mode differentiation of expressions.

Values travel as ``torch.float64`` tensors of shape ``[B]`` so one call
evaluates an expression at every node of a grid or every sample of a box.
Derivatives use dual numbers with a single tangent channel: ``grad`` runs
one sweep per input variable the expression actually uses.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import torch

from src.errors import DomainError, NonDifferentiableError
from src.expr.nodes import Add, Call, Div, Expr, Mul, Neg, Node, Num, Pow, Sub, Var, constant_value, to_text


# |s| below this makes sqrt'(s) and abs'(s) undefined for our purposes.
KINK_GUARD = 1e-12

DTYPE = torch.float64


def _format_vector(values: Sequence[float]) -> str:
    return "(" + ", ".join(repr(float(v)) for v in values) + ")"


@dataclass(frozen=True)
class Point:
    t: float
    x: Tuple[float, ...]
    u: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))

    def as_batch(self) -> "PointBatch":
        return PointBatch(
            t=torch.tensor([self.t], dtype=DTYPE),
            x=torch.tensor([list(self.x)], dtype=DTYPE).reshape(1, len(self.x)),
            u=torch.tensor([list(self.u)], dtype=DTYPE).reshape(1, len(self.u)),
        )

    def __str__(self) -> str:
        return f"(t={self.t!r}, x={_format_vector(self.x)}, u={_format_vector(self.u)})"


@dataclass(frozen=True, eq=False)
class PointBatch:
    t: torch.Tensor  # [B]
    x: torch.Tensor  # [B, n]
    u: torch.Tensor  # [B, r]

    def __post_init__(self) -> None:
        size = self.t.shape[0]
        if self.t.dim() != 1 or self.x.dim() != 2 or self.u.dim() != 2:
            raise ValueError("PointBatch expects t:[B], x:[B,n], u:[B,r]")
        if self.x.shape[0] != size or self.u.shape[0] != size:
            raise ValueError("PointBatch components disagree on batch size")

    def __len__(self) -> int:
        return int(self.t.shape[0])

    @property
    def n(self) -> int:
        return int(self.x.shape[1])

    @property
    def r(self) -> int:
        return int(self.u.shape[1])

    def point(self, index: int) -> Point:
        return Point(float(self.t[index]), self.x[index].tolist(), self.u[index].tolist())

    def select(self, mask: torch.Tensor) -> "PointBatch":
        return PointBatch(self.t[mask], self.x[mask], self.u[mask])

    @classmethod
    def from_points(cls, points: Iterable[Point]) -> "PointBatch":
        points = list(points)
        if not points:
            raise ValueError("Cannot build a PointBatch from zero points")
        n, r = len(points[0].x), len(points[0].u)
        return cls(
            t=torch.tensor([p.t for p in points], dtype=DTYPE),
            x=torch.tensor([list(p.x) for p in points], dtype=DTYPE).reshape(len(points), n),
            u=torch.tensor([list(p.u) for p in points], dtype=DTYPE).reshape(len(points), r),
        )


@dataclass(frozen=True)
class Gradient:
    value: float
    d_dt: float
    d_dx: Tuple[float, ...]
    d_du: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class BatchValue:
    values: torch.Tensor  # [B], NaN where invalid
    valid: torch.Tensor  # [B] bool


@dataclass(frozen=True, eq=False)
class BatchGradient:
    value: torch.Tensor  # [B]
    d_dt: torch.Tensor  # [B]
    d_dx: torch.Tensor  # [B, n]
    d_du: torch.Tensor  # [B, r]
    valid: torch.Tensor  # [B] bool


class Dual:
    """Value plus one tangent channel; ``deriv`` is None in value-only sweeps."""

    __slots__ = ("value", "deriv")

    def __init__(self, value: torch.Tensor, deriv: Optional[torch.Tensor]):
        self.value = value
        self.deriv = deriv


class _Sweep:
    def __init__(self, expr: Expr, batch: PointBatch, seed: Optional[Tuple[str, int]], strict: bool):
        if batch.n != expr.n or batch.r != expr.r:
            raise ValueError(
                f"Point dimensions (n={batch.n}, r={batch.r}) do not match expression (n={expr.n}, r={expr.r})"
            )
        self.batch = batch
        self.seed = seed
        self.strict = strict
        self.size = len(batch)
        self.invalid = torch.zeros(self.size, dtype=torch.bool)

    def run(self, root: Node) -> Dual:
        return self._visit(root)

    def _flag(self, mask: torch.Tensor, node: Node, message: str, error_cls) -> torch.Tensor:
        mask = mask & ~self.invalid
        if bool(mask.any()):
            if self.strict:
                index = int(torch.nonzero(mask)[0])
                raise error_cls(message, to_text(node), self.batch.point(index))
            self.invalid = self.invalid | mask
        return self.invalid

    def _zeros(self) -> torch.Tensor:
        return torch.zeros(self.size, dtype=DTYPE)

    def _visit(self, node: Node) -> Dual:
        if isinstance(node, Num):
            value = torch.full((self.size,), float(node.value), dtype=DTYPE)
            return Dual(value, None if self.seed is None else self._zeros())
        if isinstance(node, Var):
            return self._variable(node)
        if isinstance(node, Neg):
            a = self._visit(node.operand)
            return Dual(-a.value, None if a.deriv is None else -a.deriv)
        if isinstance(node, Call):
            return self._call(node, self._visit(node.arg))
        if isinstance(node, Pow):
            return self._power(node)

        a = self._visit(node.left)
        b = self._visit(node.right)
        if isinstance(node, Add):
            return Dual(a.value + b.value, None if a.deriv is None else a.deriv + b.deriv)
        if isinstance(node, Sub):
            return Dual(a.value - b.value, None if a.deriv is None else a.deriv - b.deriv)
        if isinstance(node, Mul):
            deriv = None if a.deriv is None else a.deriv * b.value + a.value * b.deriv
            return Dual(a.value * b.value, deriv)
        if isinstance(node, Div):
            bad = self._flag(b.value == 0.0, node, "Division by zero", DomainError)
            denom = torch.where(bad, torch.ones_like(b.value), b.value)
            value = a.value / denom
            deriv = None if a.deriv is None else (a.deriv * denom - a.value * b.deriv) / (denom * denom)
            return Dual(value, deriv)
        raise TypeError(f"Unsupported node {type(node).__name__}")

    def _variable(self, node: Var) -> Dual:
        if node.kind == "t":
            value = self.batch.t
        elif node.kind == "x":
            value = self.batch.x[:, node.index - 1]
        else:
            value = self.batch.u[:, node.index - 1]
        if self.seed is None:
            return Dual(value, None)
        hit = (node.kind, node.index) == self.seed
        return Dual(value, torch.ones_like(value) if hit else self._zeros())

    def _power(self, node: Pow) -> Dual:
        base = self._visit(node.left)
        exponent_const = constant_value(node.right)
        if exponent_const is not None:
            c = exponent_const
            a = base.value
            if c < 0:
                bad = self._flag(a == 0.0, node, "Division by zero in negative power", DomainError)
                a = torch.where(bad, torch.ones_like(a), a)
            if not float(c).is_integer():
                bad = self._flag(a < 0.0, node, "Negative base with fractional exponent", DomainError)
                a = torch.where(bad, torch.ones_like(a), a)
            value = torch.pow(a, c)
            if base.deriv is None:
                return Dual(value, None)
            if c == 0.0:
                return Dual(value, self._zeros())
            if c < 1.0 and not float(c).is_integer():
                bad = self._flag(a.abs() < KINK_GUARD, node, "Non-differentiable power at zero", NonDifferentiableError)
                a = torch.where(bad, torch.ones_like(a), a)
            return Dual(value, c * torch.pow(a, c - 1.0) * base.deriv)

        exponent = self._visit(node.right)
        a = base.value
        bad = self._flag(a <= 0.0, node, "Variable exponent requires a positive base", DomainError)
        a = torch.where(bad, torch.ones_like(a), a)
        log_a = torch.log(a)
        value = torch.exp(exponent.value * log_a)
        if base.deriv is None:
            return Dual(value, None)
        return Dual(value, value * (exponent.deriv * log_a + exponent.value * base.deriv / a))

    def _call(self, node: Call, a: Dual) -> Dual:
        x = a.value
        func = node.func
        if func == "exp":
            value = torch.exp(x)
            bad = self._flag(torch.isinf(value) & torch.isfinite(x), node, "Overflow in exp", DomainError)
            value = torch.where(bad, torch.ones_like(value), value)
            return Dual(value, None if a.deriv is None else value * a.deriv)
        if func == "log":
            bad = self._flag(x <= 0.0, node, "Logarithm of non-positive argument", DomainError)
            x = torch.where(bad, torch.ones_like(x), x)
            return Dual(torch.log(x), None if a.deriv is None else a.deriv / x)
        if func == "sqrt":
            bad = self._flag(x < 0.0, node, "Square root of negative argument", DomainError)
            x = torch.where(bad, torch.ones_like(x), x)
            value = torch.sqrt(x)
            if a.deriv is None:
                return Dual(value, None)
            kink = self._flag(x.abs() < KINK_GUARD, node, "Non-differentiable sqrt at zero", NonDifferentiableError)
            safe = torch.where(kink, torch.ones_like(value), value)
            return Dual(value, a.deriv / (2.0 * safe))
        if func == "sin":
            return Dual(torch.sin(x), None if a.deriv is None else torch.cos(x) * a.deriv)
        if func == "cos":
            return Dual(torch.cos(x), None if a.deriv is None else -torch.sin(x) * a.deriv)
        if func == "abs":
            value = x.abs()
            if a.deriv is None:
                return Dual(value, None)
            self._flag(value < KINK_GUARD, node, "Non-differentiable abs at zero", NonDifferentiableError)
            return Dual(value, torch.sign(x) * a.deriv)
        raise TypeError(f"Unsupported function {func}")


def _finish(values: torch.Tensor, invalid: torch.Tensor) -> torch.Tensor:
    if bool(invalid.any()):
        values = torch.where(invalid, torch.full_like(values, float("nan")), values)
    return values


def evaluate_batch(expr: Expr, batch: PointBatch, strict: bool = True) -> BatchValue:
    sweep = _Sweep(expr, batch, None, strict)
    result = sweep.run(expr.root)
    return BatchValue(values=_finish(result.value, sweep.invalid), valid=~sweep.invalid)


def grad_batch(expr: Expr, batch: PointBatch, strict: bool = True) -> BatchGradient:
    """Value and all first partials of ``expr`` at every point of ``batch``."""
    size = len(batch)
    invalid = torch.zeros(size, dtype=torch.bool)
    value: Optional[torch.Tensor] = None
    d_dt = torch.zeros(size, dtype=DTYPE)
    d_dx = torch.zeros((size, expr.n), dtype=DTYPE)
    d_du = torch.zeros((size, expr.r), dtype=DTYPE)

    channels = [("t", 0)] + [("x", i) for i in range(1, expr.n + 1)] + [("u", j) for j in range(1, expr.r + 1)]
    for kind, index in channels:
        if not expr.depends_on(kind, index):
            continue
        sweep = _Sweep(expr, batch, (kind, index), strict)
        result = sweep.run(expr.root)
        invalid = invalid | sweep.invalid
        if value is None:
            value = result.value
        if kind == "t":
            d_dt = result.deriv
        elif kind == "x":
            d_dx[:, index - 1] = result.deriv
        else:
            d_du[:, index - 1] = result.deriv

    if value is None:
        plain = _Sweep(expr, batch, None, strict)
        value = plain.run(expr.root).value
        invalid = invalid | plain.invalid

    if bool(invalid.any()):
        nan = float("nan")
        value = torch.where(invalid, torch.full_like(value, nan), value)
        d_dt = torch.where(invalid, torch.full_like(d_dt, nan), d_dt)
        d_dx = torch.where(invalid.unsqueeze(1), torch.full_like(d_dx, nan), d_dx)
        d_du = torch.where(invalid.unsqueeze(1), torch.full_like(d_du, nan), d_du)
    return BatchGradient(value=value, d_dt=d_dt, d_dx=d_dx, d_du=d_du, valid=~invalid)


def evaluate(expr: Expr, point: Point) -> float:
    """IEEE double value of ``expr`` at ``point``; raises DomainError instead of producing NaN."""
    return float(evaluate_batch(expr, point.as_batch()).values[0])


def grad(expr: Expr, point: Point) -> Gradient:
    result = grad_batch(expr, point.as_batch())
    return Gradient(
        value=float(result.value[0]),
        d_dt=float(result.d_dt[0]),
        d_dx=tuple(result.d_dx[0].tolist()),
        d_du=tuple(result.d_du[0].tolist()),
    )
