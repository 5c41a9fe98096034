import math

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from config.problem_registry import get_builtin_path
from src.errors import InvariantError
from src.problem import GridFn, load_problem, parse_problem_text, uniform_nodes
from src.regularity import (
    SampleBox,
    check_affine,
    check_alpha_bound,
    check_coercivity,
    check_growth_theorem53,
    check_growth_tonelli_morrey_cv,
    expand_box,
    fit_growth,
    recheck_affine,
    recheck_growth,
)


def _problem(L: str, phi: list[str], n: int = 1, r: int = 1):
    lines = [f"n = {n}", f"r = {r}", "a = 0.0", "b = 1.0", f"A = {[0.0] * n}", f"B = {[1.0] * n}", f'L = "{L}"']
    lines += [f'phi{i} = "{expr}"' for i, expr in enumerate(phi, start=1)]
    return parse_problem_text("\n".join(lines) + "\n", default_name="sampled")


def _torres():
    return load_problem(get_builtin_path("torres-6.1"))


def test_sample_box_is_deterministic_for_a_seed() -> None:
    p = _torres()
    box = SampleBox.for_problem(p, box_u=(-10.0, 10.0), box_x=(-2.0, 2.0), count=64, seed=3)

    first, second = box.sample(), box.sample()
    other = box.with_seed(4).sample()

    assert torch.equal(first.u, second.u) and torch.equal(first.x, second.x)
    assert not torch.equal(first.u, other.u)
    assert bool((first.u.abs() <= 10.0).all()) and bool((first.x.abs() <= 2.0).all())
    assert box.scaled(4).u_box == ((-40.0, 40.0), (-40.0, 40.0))
    assert box.scaled(4).count == 256


def test_boxes_must_be_nonempty_and_match_dimensions() -> None:
    with pytest.raises(InvariantError, match="nonempty"):
        expand_box((1.0, -1.0), 2, "u")
    with pytest.raises(InvariantError, match="expected 2"):
        expand_box([(0.0, 1.0)] * 3, 2, "x")
    with pytest.raises(InvariantError, match="do not match problem"):
        check_growth_theorem53(_torres(), SampleBox((0.0, 1.0), ((-1.0, 1.0),), ((-1.0, 1.0),)))


def test_fit_prefers_smallest_bound_and_reports_witness() -> None:
    batch = SampleBox((0.0, 1.0), ((-1.0, 1.0),), ((-1.0, 1.0),), count=4).sample()
    lhs = torch.tensor([2.0, 4.0, 1.0, 0.5], dtype=torch.float64)
    rhs = torch.tensor([1.0, 2.0, 0.1, 10.0], dtype=torch.float64)

    fit = fit_growth("demo", lhs, rhs, batch, k_grid=(0.0, 1.0))

    # k = 0 needs c = 10, k = 1 needs c = 1.5, the box bound is (0, 4).
    assert (fit.c, fit.k) == (1.5, 1.0)
    assert fit.max_ratio == pytest.approx(10.0)
    assert fit.witness == batch.point(2)
    assert fit.certifies(1.5, 1.0)
    assert not fit.certifies(1.0, 1.0)


def test_torres_growth_certificates_on_the_reference_box() -> None:
    p = _torres()
    box = SampleBox.for_problem(p, box_u=(-10.0, 10.0), box_x=(-2.0, 2.0), seed=0)

    report = check_growth_theorem53(p, box)

    assert report.verdict == "satisfied-on-box"
    assert report.tonelli_morrey_pair == "satisfied-on-box"
    assert report.skipped == 0
    assert report.certifies("dL_dx", 2.0, 0.0)
    assert report.certifies("dphi2_dx", 1.0, 0.0)
    assert report.certifies("dphi1_dx", 1.0, 0.0)
    dl_dx = report.conditions["dL_dx"].fit
    assert dl_dx.k == 0.0
    assert dl_dx.c < 2.0
    assert dl_dx.c == pytest.approx(2 * math.exp(8) / (math.exp(8) + 1), rel=1e-2)
    assert report.conditions["dphi2_dx"].fit.c == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(KeyError, match="Unknown condition"):
        report.certifies("dL_du", 1.0, 0.0)

    document = report.to_dict()
    assert document["check"] == "growth"
    assert [level["factor"] for level in document["conditions"]["dL_dx"]["escalation"]] == [1, 2, 4]


def test_exact_certificates_survive_a_fresh_seed() -> None:
    p = _torres()
    report = check_growth_theorem53(p, SampleBox.for_problem(p, count=512, seed=0))

    violations = recheck_growth(p, report, seed=99)

    assert violations["dL_dt"] <= 0.0
    assert violations["dphi1_dx"] <= 0.0
    assert violations["dphi2_dx"] <= 1e-9 * 1e4


def test_calculus_of_variations_growth_on_baseline() -> None:
    p = load_problem(get_builtin_path("baseline"))

    wide = check_growth_tonelli_morrey_cv(p, SampleBox.for_problem(p, box_u=(-10.0, 10.0), seed=1))
    narrow = check_growth_tonelli_morrey_cv(p, SampleBox.for_problem(p, box_u=(-1.0, 1.0), seed=1))

    wide_fit = wide.conditions["dL_dx_plus_dL_du"].fit
    narrow_fit = narrow.conditions["dL_dx_plus_dL_du"].fit
    assert wide_fit.k == 1.0
    assert wide_fit.c == pytest.approx(1.0, abs=1e-3)
    assert narrow_fit.c == 0.0
    assert narrow_fit.k == pytest.approx(2.0, abs=1e-2)
    assert wide.verdict == "satisfied-on-box"
    assert "tonelli_morrey_pair" not in wide.to_dict()

    # The fitted c sits just below 1 and 2|u| <= u^2 + 1 is tight at |u| = 1.
    assert recheck_growth(p, wide, seed=2)["dL_dx_plus_dL_du"] <= 1e-2


def test_calculus_of_variations_mode_rejects_general_dynamics() -> None:
    p = _torres()

    with pytest.raises(InvariantError, match="calculus-of-variations"):
        check_growth_tonelli_morrey_cv(p, SampleBox.for_problem(p, count=16))


def test_growth_that_follows_the_box_is_suspect() -> None:
    p = _problem("x1 * u1^2", ["u1"])

    report = check_growth_theorem53(p, SampleBox.for_problem(p, count=512, seed=0))

    assert report.conditions["dL_dx"].verdict == "suspect"
    assert report.verdict == "suspect"
    assert report.tonelli_morrey_pair == "suspect"
    bounds = [level.bound for level in report.conditions["dL_dx"].levels]
    assert bounds[-1] > 1.25 * bounds[0]


def test_coercivity_of_quadratic_integrand() -> None:
    p = load_problem(get_builtin_path("baseline"))

    report = check_coercivity(p, SampleBox.for_problem(p, seed=0), shells=10)

    assert report.verdict == "pass"
    assert report.bounded_below and report.ratio_increasing and report.phi_grows_at_edge
    assert report.empty_shells == 0
    # L = |phi|^2 exactly, so every shell's lower envelope sits on the parabola.
    for shell in report.shells:
        assert shell.count > 0
        assert shell.quadratic_ratio == pytest.approx(1.0, rel=1e-12)
    assert report.to_dict()["check"] == "coercivity"


def test_coercivity_of_torres_has_quadratic_lower_envelope() -> None:
    p = _torres()

    report = check_coercivity(p, SampleBox.for_problem(p, seed=0))

    assert report.verdict == "pass"
    # |phi|^2 = |u|^2 + u2^2 e^{2(x1+x2)} <= L at every point, so the envelope ratio is at least 1 in every shell.
    assert report.empty_shells == 0
    for shell in report.shells:
        assert shell.quadratic_ratio is not None
        assert shell.quadratic_ratio >= 1.0 - 1e-9


def test_linear_growth_is_not_coercive() -> None:
    p = _problem("sqrt(1 + u1^2)", ["u1"])

    report = check_coercivity(p, SampleBox.for_problem(p, seed=0))

    assert not report.ratio_increasing
    assert report.verdict == "fail"
    with pytest.raises(InvariantError, match="at least 4 shells"):
        check_coercivity(p, SampleBox.for_problem(p, seed=0), shells=3)


def test_torres_dynamics_are_not_control_affine() -> None:
    p = _torres()

    report = check_affine(p, SampleBox.for_problem(p, seed=0))

    assert not report.affine
    assert report.verdict == "inapplicable"
    assert report.witness["component"] == 1
    assert report.fit is None
    with pytest.raises(InvariantError, match="no fitted parameters"):
        recheck_affine(p, report, SampleBox.for_problem(p, seed=1))


def test_affine_problem_with_full_rank_gets_a_fit() -> None:
    p = load_problem(get_builtin_path("lq"))

    report = check_affine(p, SampleBox.for_problem(p, seed=0))

    assert report.affine and report.full_rank
    assert report.verdict == "applicable"
    assert report.fit.gamma > 0.0
    assert report.fit.beta < 2.0
    assert report.fit.mu >= max(report.fit.beta - 2.0, -2.0)
    assert report.zeta >= 0.0


def test_baseline_affine_fit_rechecks_on_a_fresh_seed() -> None:
    p = load_problem(get_builtin_path("baseline"))

    report = check_affine(p, SampleBox.for_problem(p, seed=0))

    assert report.verdict == "applicable"
    assert recheck_affine(p, report, SampleBox.for_problem(p, seed=5)) <= 0.0


def test_rank_deficient_control_matrix_is_detected() -> None:
    p = _problem("u1^2", ["x1 * u1"])

    report = check_affine(p, SampleBox.for_problem(p, seed=0))

    assert report.affine
    assert report.full_rank is False
    assert report.rank["deficient_points"] >= 1
    assert report.verdict == "inapplicable"


def test_alpha_bound_for_torres_with_frozen_control() -> None:
    p = _torres()
    w = GridFn.constant(uniform_nodes(0.0, 1.0, 20), [1.0, 0.0])

    report = check_alpha_bound(p, w, (-1.0, 2.0), samples=64)

    assert report.verdict == "finite"
    assert len(report.alpha) == 21
    for value in report.alpha:
        assert value == pytest.approx(2 * math.exp(8), rel=1e-12)
    assert report.integral == pytest.approx(2 * math.exp(8), rel=1e-12)
    assert report.samples_per_node == 64 + 4


def test_alpha_bound_rejects_control_on_another_interval() -> None:
    p = _torres()
    w = GridFn.constant(uniform_nodes(0.0, 2.0, 4), [1.0, 0.0])

    with pytest.raises(InvariantError, match="Frozen control lives on"):
        check_alpha_bound(p, w, (-1.0, 2.0), samples=8)


@settings(max_examples=25)
@given(
    st.floats(min_value=0.1, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=0.5, max_value=5.0),
)
def test_state_nonlinear_dynamics_affine_in_control_are_detected(a: float, b: float, c: float) -> None:
    p = _problem("u1^2 + x1^2", [f"sin({a!r} * x1) + ({b!r}) * t * x1^2 + {c!r} * (2 + cos(x1)) * u1"])

    report = check_affine(p, SampleBox.for_problem(p, count=256, seed=0))

    assert report.affine
    assert report.witness is None
    assert report.full_rank


def test_escalation_levels_accumulate_samples() -> None:
    p = load_problem(get_builtin_path("baseline"))
    box = SampleBox.for_problem(p, count=128, seed=0)

    growth = check_growth_theorem53(p, box).to_dict()
    coercivity = check_coercivity(p, box)

    expected = [128, 128 + 256, 128 + 256 + 512]
    for condition in growth["conditions"].values():
        counts = [level["samples"] for level in condition["escalation"]]
        assert counts == expected
        assert all(b > a for a, b in zip(counts, counts[1:]))
    assert [level.samples for level in coercivity.levels] == expected
    assert [level.factor for level in coercivity.levels] == [1.0, 2.0, 4.0]
