import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import (
    DomainError,
    ExprSyntaxError,
    IndexOutOfRangeError,
    NonDifferentiableError,
    UnknownIdentifierError,
)
from src.expr import Point, PointBatch, evaluate, evaluate_batch, grad, grad_batch, parse, to_text
from src.expr.nodes import Add, Call, Div, Mul, Neg, Num, Pow, Sub, Var


def _point(t: float, x, u) -> Point:
    return Point(t, tuple(x), tuple(u))


def test_parse_respects_precedence_and_right_associative_power() -> None:
    expr = parse("1 + 2 * 3 ^ 2 ^ 0.5", n=0, r=0)

    assert expr.root == Add(Num(1.0), Mul(Num(2.0), Pow(Num(3.0), Pow(Num(2.0), Num(0.5)))))


def test_unary_minus_binds_looser_than_power() -> None:
    expr = parse("-u1^2", n=0, r=1)

    assert expr.root == Neg(Pow(Var("u", 1), Num(2.0)))
    assert evaluate(expr, _point(0.0, (), (3.0,))) == -9.0


def test_serialize_parenthesizes_every_composite() -> None:
    expr = parse("x1 - u1 / 2 + exp(t)", n=1, r=1)

    assert expr.serialize() == "((x1 - (u1 / 2.0)) + exp(t))"


def test_unknown_identifier_reports_byte_offset() -> None:
    with pytest.raises(UnknownIdentifierError, match="Unknown identifier 'y1'") as info:
        parse("u1 + y1", n=1, r=1)

    assert info.value.offset == 5
    assert info.value.name == "y1"


def test_offsets_count_bytes_not_characters() -> None:
    # U+00A0 is whitespace but two bytes in UTF-8.
    with pytest.raises(UnknownIdentifierError) as info:
        parse("  y", n=0, r=0)
    assert info.value.offset == 4

    with pytest.raises(ExprSyntaxError) as info:
        parse("1 + é", n=0, r=0)
    assert info.value.offset == 4


def test_index_out_of_range_is_distinguished() -> None:
    with pytest.raises(IndexOutOfRangeError, match="x3") as info:
        parse("x3 + 1", n=2, r=1)

    assert info.value.limit == 2
    assert info.value.offset == 0


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "Empty expression"),
        ("(u1 + 1", "Expected '\\)'"),
        ("u1 +", "Unexpected 'end of input'"),
        ("exp u1", "must be followed by"),
        ("u1(2)", "is a variable"),
        ("1 2", "after complete expression"),
    ],
)
def test_syntax_errors(text: str, fragment: str) -> None:
    with pytest.raises(ExprSyntaxError, match=fragment):
        parse(text, n=1, r=1)


def test_evaluate_matches_closed_form() -> None:
    expr = parse("(u1^2 + u2^2) * (exp(2*(x1 + x2)) + 1)", n=2, r=2)
    point = _point(0.3, (0.1, -0.4), (1.5, -2.0))

    expected = (1.5**2 + 2.0**2) * (math.exp(2 * (0.1 - 0.4)) + 1)
    assert evaluate(expr, point) == pytest.approx(expected, rel=1e-15)


def test_domain_errors_carry_subexpression_and_point() -> None:
    expr = parse("log(x1) + u1", n=1, r=1)

    with pytest.raises(DomainError, match="log") as info:
        evaluate(expr, _point(0.0, (-1.0,), (2.0,)))

    assert info.value.subexpression == "log(x1)"
    assert info.value.point.x == (-1.0,)


def test_division_by_zero_is_a_domain_error() -> None:
    expr = parse("1 / (u1 - 1)", n=0, r=1)

    with pytest.raises(DomainError, match="Division by zero"):
        evaluate(expr, _point(0.0, (), (1.0,)))


def test_constant_quotient_exponent_is_a_fractional_power() -> None:
    expr = parse("x1^(1/2)", n=1, r=1)

    assert evaluate(expr, _point(0.0, (0.0,), (0.0,))) == 0.0
    assert evaluate(expr, _point(0.0, (4.0,), (0.0,))) == 2.0
    assert grad(expr, _point(0.0, (4.0,), (0.0,))).d_dx[0] == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(NonDifferentiableError, match="power at zero"):
        grad(expr, _point(0.0, (0.0,), (0.0,)))
    with pytest.raises(DomainError, match="fractional exponent"):
        evaluate(expr, _point(0.0, (-1.0,), (0.0,)))
    with pytest.raises(DomainError, match="Division by zero"):
        evaluate(parse("x1^(1/0)", n=1, r=1), _point(0.0, (2.0,), (0.0,)))


def test_lenient_batch_marks_invalid_points_with_nan() -> None:
    expr = parse("sqrt(x1)", n=1, r=1)
    batch = PointBatch.from_points(Point(0.0, (x,), (0.0,)) for x in (4.0, -1.0, 9.0))

    result = evaluate_batch(expr, batch, strict=False)

    assert result.valid.tolist() == [True, False, True]
    assert result.values[0].item() == 2.0
    assert math.isnan(result.values[1].item())


def test_gradient_of_torres_integrand() -> None:
    expr = parse("(u1^2 + u2^2) * (exp(2*(x1 + x2)) + 1)", n=2, r=2)
    point = _point(0.0, (0.2, 0.1), (1.0, -0.5))

    g = grad(expr, point)

    s = math.exp(2 * 0.3)
    norm2 = 1.0 + 0.25
    assert g.d_dt == 0.0
    assert g.d_dx[0] == pytest.approx(2 * norm2 * s, rel=1e-14)
    assert g.d_dx[1] == pytest.approx(2 * norm2 * s, rel=1e-14)
    assert g.d_du == pytest.approx((2 * 1.0 * (s + 1), 2 * -0.5 * (s + 1)), rel=1e-14)


def test_sqrt_kink_is_not_differentiable() -> None:
    expr = parse("sqrt(u1^2 + u2^2)", n=1, r=2)

    assert evaluate(expr, _point(0.0, (0.0,), (0.0, 0.0))) == 0.0
    with pytest.raises(NonDifferentiableError, match="sqrt"):
        grad(expr, _point(0.0, (0.0,), (0.0, 0.0)))


def test_abs_kink_is_skipped_in_lenient_mode() -> None:
    expr = parse("abs(u1)", n=1, r=1)
    batch = PointBatch(
        torch.zeros(2, dtype=torch.float64),
        torch.zeros((2, 1), dtype=torch.float64),
        torch.tensor([[0.0], [-2.0]], dtype=torch.float64),
    )

    result = grad_batch(expr, batch, strict=False)

    assert result.valid.tolist() == [False, True]
    assert result.d_du[1, 0].item() == -1.0


def test_gradient_matches_central_differences_on_bundled_integrands() -> None:
    cases = [
        ("u1^2", 1, 1),
        ("u1^2 + x1^2", 1, 1),
        ("(u1^2 + u2^2) * (exp(2*(x1 + x2)) + 1)", 2, 2),
        ("sqrt(u1^2 + u2^2)", 2, 2),
        ("u2 * exp(x1 + x2)", 2, 2),
        ("sin(t) * x1 / (2 + cos(u1)) + u1^3", 1, 1),
    ]
    generator = torch.Generator().manual_seed(11)
    step = 1e-6
    for text, n, r in cases:
        expr = parse(text, n=n, r=r)
        for _ in range(100):
            t = float(torch.rand(1, generator=generator, dtype=torch.float64))
            x = (torch.rand(n, generator=generator, dtype=torch.float64) * 2 - 1).tolist()
            u = (torch.rand(r, generator=generator, dtype=torch.float64) * 4 - 2).tolist()
            if text.startswith("sqrt") and math.hypot(*u) < 1e-3:
                continue
            g = grad(expr, _point(t, x, u))
            coordinates = [("t", 0)] + [("x", i) for i in range(n)] + [("u", j) for j in range(r)]
            analytic = [g.d_dt, *g.d_dx, *g.d_du]
            for (kind, index), value in zip(coordinates, analytic):

                def shifted(delta: float) -> float:
                    tt, xx, uu = t, list(x), list(u)
                    if kind == "t":
                        tt += delta
                    elif kind == "x":
                        xx[index] += delta
                    else:
                        uu[index] += delta
                    return evaluate(expr, _point(tt, xx, uu))

                numeric = (shifted(step) - shifted(-step)) / (2 * step)
                assert abs(numeric - value) <= 1e-5 * max(1.0, abs(value)), (text, kind, index)


_LEAVES = st.one_of(
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from([Var("t", 0), Var("x", 1), Var("x", 2), Var("u", 1)]),
)


def _extend(children):
    binary = st.sampled_from([Add, Sub, Mul, Div, Pow])
    return st.one_of(
        st.builds(lambda op, a, b: op(a, b), binary, children, children),
        children.map(Neg),
        st.builds(Call, st.sampled_from(["exp", "log", "sqrt", "sin", "cos", "abs"]), children),
    )


@settings(max_examples=200)
@given(st.recursive(_LEAVES, _extend, max_leaves=12))
def test_parse_serialize_parse_is_stable(tree) -> None:
    first = parse(to_text(tree), n=2, r=1)
    second = parse(first.serialize(), n=2, r=1)

    assert second.root == first.root
    assert second.serialize() == first.serialize()
