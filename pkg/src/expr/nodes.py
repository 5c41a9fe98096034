"""Expression tree nodes and their text form.

Grammar (whitespace-insensitive)::

    expression := prefix (binop expression)*        precedence climbing
    binop      := '+' | '-'  (10, left)
                | '*' | '/'  (20, left)
                | '^'        (30, right)
    prefix     := '-' expression@25 | '+' expression@25 | primary
    primary    := NUMBER | VARIABLE | FUNCTION '(' expression ')' | '(' expression ')'
    VARIABLE   := 't' | 'x' INDEX | 'u' INDEX          1 <= INDEX <= n (resp. r)
    FUNCTION   := 'exp' | 'log' | 'sqrt' | 'sin' | 'cos' | 'abs'
    NUMBER     := digits ['.' digits] [('e'|'E') ['+'|'-'] digits] | '.' digits [...]

Unary minus sits at 25, between '*' and '^', so ``-x^2`` is ``-(x^2)``.
"""

from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple, Union


FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "abs")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "t", "x" or "u"
    index: int = 0  # 1-based for x and u, 0 for t

    @property
    def name(self) -> str:
        return "t" if self.kind == "t" else f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class Add:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Sub:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Mul:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Div:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, Add, Sub, Mul, Div, Pow, Call]

BINARY_SYMBOLS = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}


def to_text(node: Node) -> str:
    """Serialize a tree; every composite node is parenthesized."""
    if isinstance(node, Num):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    symbol = BINARY_SYMBOLS[type(node)]
    return f"({to_text(node.left)} {symbol} {to_text(node.right)})"


def collect_variables(node: Node) -> FrozenSet[Tuple[str, int]]:
    if isinstance(node, Num):
        return frozenset()
    if isinstance(node, Var):
        return frozenset({(node.kind, node.index)})
    if isinstance(node, Neg):
        return collect_variables(node.operand)
    if isinstance(node, Call):
        return collect_variables(node.arg)
    return collect_variables(node.left) | collect_variables(node.right)


def constant_value(node: Node) -> Optional[float]:
    """Value of a variable-free subtree built from literals, negation and arithmetic."""
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Neg):
        inner = constant_value(node.operand)
        return None if inner is None else -inner
    if isinstance(node, (Add, Sub, Mul, Div)):
        left = constant_value(node.left)
        right = constant_value(node.right)
        if left is None or right is None:
            return None
        if isinstance(node, Add):
            return left + right
        if isinstance(node, Sub):
            return left - right
        if isinstance(node, Div):
            # A zero divisor is left to evaluation, which reports it as a domain error.
            return None if right == 0.0 else left / right
        return left * right
    return None


@dataclass(frozen=True)
class Expr:
    """A parsed scalar expression over (t, x1..xn, u1..ur)."""

    root: Node
    n: int
    r: int
    variables: FrozenSet[Tuple[str, int]] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        used = collect_variables(self.root)
        for kind, index in used:
            limit = self.n if kind == "x" else self.r if kind == "u" else 0
            if kind != "t" and not 1 <= index <= limit:
                raise ValueError(f"Variable {kind}{index} outside declared dimension {limit}")
        object.__setattr__(self, "variables", used)

    def serialize(self) -> str:
        return to_text(self.root)

    def depends_on(self, kind: str, index: int = 0) -> bool:
        return (kind, index) in self.variables

    def __str__(self) -> str:
        return self.serialize()
