"""Expression package: parsing, serialization and differentiation of L and phi."""

from .evaluate import (
    KINK_GUARD,
    BatchGradient,
    BatchValue,
    Gradient,
    Point,
    PointBatch,
    evaluate,
    evaluate_batch,
    grad,
    grad_batch,
)
from .nodes import Expr, to_text
from .parser import parse

__all__ = [
    "KINK_GUARD",
    "BatchGradient",
    "BatchValue",
    "Expr",
    "Gradient",
    "Point",
    "PointBatch",
    "evaluate",
    "evaluate_batch",
    "grad",
    "grad_batch",
    "parse",
    "to_text",
]
