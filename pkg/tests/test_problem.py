import math

import pytest
import torch

from config.problem_registry import BUILTIN_PROBLEMS, get_builtin_path
from src.errors import InvariantError, ProblemFileError
from src.problem import (
    GridFn,
    check_admissible,
    cost_P,
    default_pair,
    load_problem,
    pair_on_grid,
    parse_problem_text,
    uniform_nodes,
)


BASELINE_TEXT = """\
name = "baseline"
n = 1
r = 1
a = 0.0
b = 1.0
A = [0.0]
B = [1.0]
L = "u1^2"
phi1 = "u1"
"""


def _torres_quadruple_pair(num_intervals: int):
    nodes = uniform_nodes(0.0, 1.0, num_intervals)
    states = torch.stack([nodes, torch.ones_like(nodes)], dim=1)
    controls = torch.tensor([1.0, 0.0], dtype=torch.float64).repeat(num_intervals, 1)
    return pair_on_grid(nodes, states, controls)


def test_bundled_problems_load_with_declared_dimensions() -> None:
    dims = {"baseline": (1, 1), "lq": (1, 1), "torres-6.1": (2, 2)}

    for name in BUILTIN_PROBLEMS:
        p = load_problem(get_builtin_path(name))
        assert p.name == name
        assert (p.n, p.r) == dims[name]
        assert (p.a, p.b) == (0.0, 1.0)

    torres = load_problem(get_builtin_path("torres-6.1"))
    assert torres.describe()["phi"] == ["sqrt(((u1 ^ 2.0) + (u2 ^ 2.0)))", "(u2 * exp((x1 + x2)))"]
    assert not torres.is_calculus_of_variations()
    assert load_problem(get_builtin_path("baseline")).is_calculus_of_variations()


def test_unknown_builtin_lists_choices() -> None:
    with pytest.raises(ValueError, match="Unknown builtin problem 'nope'"):
        get_builtin_path("nope")


def test_missing_key_is_named() -> None:
    text = BASELINE_TEXT.replace('L = "u1^2"\n', "")

    with pytest.raises(ProblemFileError, match="Missing required key") as info:
        parse_problem_text(text)

    assert info.value.key == "L"


def test_unknown_key_reports_line() -> None:
    with pytest.raises(ProblemFileError, match="Unknown key") as info:
        parse_problem_text(BASELINE_TEXT + "phi2 = \"u1\"\n")

    assert info.value.key == "phi2"
    assert info.value.line == 10


def test_bad_expression_reports_key_line_and_offset() -> None:
    text = BASELINE_TEXT.replace('L = "u1^2"', 'L = "u1^2 + y1"')

    with pytest.raises(ProblemFileError, match="Unknown identifier 'y1'.*byte offset 7") as info:
        parse_problem_text(text)

    assert info.value.key == "L"
    assert info.value.line == 8


@pytest.mark.parametrize(
    "old, new, key, fragment",
    [
        ("n = 1", "n = 0", "n", "Dimension must be >= 1"),
        ("n = 1", "n = 1.5", "n", "Expected an integer"),
        ("b = 1.0", "b = 0.0", "a", "Interval requires a < b"),
        ("A = [0.0]", "A = [0.0, 1.0]", "A", "Expected 1 entries"),
        ('B = [1.0]', 'B = "one"', "B", "bracketed list"),
        ('L = "u1^2"', "L = 3", "L", "quoted expression"),
    ],
)
def test_invalid_values_are_rejected(old: str, new: str, key: str, fragment: str) -> None:
    with pytest.raises(ProblemFileError, match=fragment) as info:
        parse_problem_text(BASELINE_TEXT.replace(old, new))

    assert info.value.key == key


def test_malformed_file_reports_line() -> None:
    text = BASELINE_TEXT.replace("r = 1", "r = ")

    with pytest.raises(ProblemFileError, match="Malformed problem file") as info:
        parse_problem_text(text)

    assert info.value.line == 3


def test_load_problem_defaults_name_to_file_stem(tmp_path) -> None:
    path = tmp_path / "my_problem.ocp"
    path.write_text(BASELINE_TEXT.replace('name = "baseline"\n', ""), encoding="utf-8")

    assert load_problem(path).name == "my_problem"


def test_default_pair_of_baseline_is_admissible_with_unit_cost() -> None:
    p = parse_problem_text(BASELINE_TEXT)
    pair = default_pair(p, 10)

    report = check_admissible(p, pair, 1e-12)

    assert report["pass"]
    assert report["max_residual"] <= 1e-12
    assert cost_P(p, pair) == pytest.approx(1.0, abs=1e-14)
    assert pair.control_sup_norm() == pytest.approx(1.0)


def test_check_admissible_locates_worst_interval() -> None:
    p = parse_problem_text(BASELINE_TEXT)
    nodes = uniform_nodes(0.0, 1.0, 4)
    controls = torch.tensor([1.0, 1.0, 3.0, 1.0], dtype=torch.float64)
    pair = pair_on_grid(nodes, nodes.clone(), controls)

    report = check_admissible(p, pair, 1e-6)

    assert not report["pass"]
    assert report["worst_interval"] == 2
    assert report["max_residual"] == pytest.approx(2.0)
    assert report["boundary_error"] == 0.0

    with pytest.raises(ValueError, match="tol must be > 0"):
        check_admissible(p, pair, 0.0)


def test_torres_quadruple_is_admissible_and_matches_quadrature() -> None:
    p = load_problem(get_builtin_path("torres-6.1"))
    pair = _torres_quadruple_pair(200)

    report = check_admissible(p, pair, 1e-6)
    cost = cost_P(p, pair)

    assert report["pass"]
    assert cost == pytest.approx((math.exp(4) - math.exp(2)) / 2 + 1, abs=1e-2)
    assert cost == pytest.approx(24.6045, abs=1e-2)


def test_pair_dimensions_are_checked_against_problem() -> None:
    p = load_problem(get_builtin_path("torres-6.1"))
    pair = default_pair(parse_problem_text(BASELINE_TEXT), 5)

    with pytest.raises(InvariantError, match="problem expects"):
        cost_P(p, pair)


def test_grid_function_rejects_non_increasing_nodes() -> None:
    with pytest.raises(InvariantError, match="strictly increasing"):
        GridFn(torch.tensor([0.0, 0.5, 0.5, 1.0]), torch.zeros(4))
    with pytest.raises(InvariantError, match="one row per node"):
        GridFn(torch.tensor([0.0, 1.0]), torch.zeros(3))
