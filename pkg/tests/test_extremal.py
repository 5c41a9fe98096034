import math

import pytest
import torch

from config.problem_registry import BUILTIN_PROBLEMS, get_builtin_path
from src.errors import InvariantError
from src.expr import Point, grad
from src.extremal import (
    adjoint_residual_P,
    adjoint_residual_Ptau,
    classify_abnormal,
    hamiltonian_P,
    hamiltonian_Ptau,
    hamiltonian_expr,
    lift_extremal,
    make_extremal,
    maximality_check_P,
    maximality_check_Ptau,
    project_extremal,
    tau_hamiltonian_expr,
    tau_point,
    verify_extremal,
    zero_level_max,
)
from src.problem import default_pair, load_problem, pair_on_grid, uniform_nodes
from src.transform import VProfile


def _baseline_extremal(num_intervals: int = 40):
    p = load_problem(get_builtin_path("baseline"))
    return p, make_extremal(default_pair(p, num_intervals), -1.0, [2.0])


def _lq_extremal(num_intervals: int = 200):
    p = load_problem(get_builtin_path("lq"))
    nodes = uniform_nodes(0.0, 1.0, num_intervals)
    s = math.sinh(1.0)
    states = torch.sinh(nodes) / s
    controls = torch.cosh(nodes) / s
    pair = pair_on_grid(nodes, states, controls)
    return p, make_extremal(pair, -1.0, (2.0 * controls).reshape(-1, 1))


def _random_points(p, count: int, seed: int):
    generator = torch.Generator().manual_seed(seed)
    for _ in range(count):
        t = float(torch.rand(1, generator=generator, dtype=torch.float64))
        z = (torch.rand(p.n, generator=generator, dtype=torch.float64) * 2 - 1).tolist()
        w = (torch.rand(p.r, generator=generator, dtype=torch.float64) * 4 - 2).tolist()
        v = 0.5 + float(torch.rand(1, generator=generator, dtype=torch.float64))
        p0 = -float(torch.rand(1, generator=generator, dtype=torch.float64))
        p_t = float(torch.randn(1, generator=generator, dtype=torch.float64))
        p_z = torch.randn(p.n, generator=generator, dtype=torch.float64).tolist()
        yield t, z, v, w, p0, p_t, p_z


@pytest.mark.parametrize("name", sorted(BUILTIN_PROBLEMS))
def test_tau_hamiltonian_is_shifted_and_scaled_hamiltonian(name: str) -> None:
    p = load_problem(get_builtin_path(name))

    for t, z, v, w, p0, p_t, p_z in _random_points(p, 100, seed=5):
        expected = (hamiltonian_P(p, t, z, w, p0, p_z) + p_t) * v
        assert hamiltonian_Ptau(p, t, z, v, w, p0, p_t, p_z) == expected


@pytest.mark.parametrize("name", sorted(BUILTIN_PROBLEMS))
def test_tau_hamiltonian_derivatives_are_scaled_by_speed(name: str) -> None:
    p = load_problem(get_builtin_path(name))

    for t, z, v, w, p0, p_t, p_z in _random_points(p, 100, seed=9):
        base = grad(hamiltonian_expr(p, p0, p_z), Point(t, z, w))
        lifted = grad(tau_hamiltonian_expr(p, p0, p_t, p_z), tau_point(t, z, v, w))

        assert abs(lifted.d_dt - v * base.d_dt) <= 1e-10 * max(1.0, abs(base.d_dt))
        for i in range(p.n):
            assert abs(lifted.d_dx[i] - v * base.d_dx[i]) <= 1e-10 * max(1.0, abs(base.d_dx[i]))
        # The derivative in v is the shifted Hamiltonian itself.
        assert abs(lifted.d_dx[p.n] - (base.value + p_t)) <= 1e-10 * max(1.0, abs(base.value))


@pytest.mark.parametrize("profile", ["identity", "two-step"])
def test_lifted_extremals_sit_on_the_zero_level(profile: str) -> None:
    for p, e in (_baseline_extremal(40), _lq_extremal(40)):
        if profile == "identity":
            v = VProfile.identity(p.a, p.b, 40)
        else:
            v = VProfile.two_step(p.a, p.b, 40, 0.5, 1.5)

        te = lift_extremal(p, e, v)

        assert zero_level_max(p, te) <= 1e-8
        assert not classify_abnormal(te)


def test_baseline_extremal_passes_adjoint_and_maximality() -> None:
    p, e = _baseline_extremal()

    report = maximality_check_P(p, e, (-4.0, 4.0))

    assert adjoint_residual_P(p, e) == 0.0
    assert abs(report.worst_gap) <= 1e-9
    assert report.argmax_found[0] == pytest.approx(1.0, abs=1e-9)


def test_wrong_adjoint_shows_a_maximality_gap() -> None:
    p = load_problem(get_builtin_path("baseline"))
    e = make_extremal(default_pair(p, 20), -1.0, [0.5])

    report = maximality_check_P(p, e, (-4.0, 4.0))

    # H = -u^2 + 0.5 u peaks at u = 0.25 with value 1/16; at u = 1 it is -0.5.
    assert report.worst_gap == pytest.approx(0.0625 + 0.5, abs=1e-6)
    assert report.candidate == (1.0,)


def test_lq_adjoint_residual_is_second_order() -> None:
    p, coarse = _lq_extremal(50)
    _, fine = _lq_extremal(100)

    r_coarse = adjoint_residual_P(p, coarse)
    r_fine = adjoint_residual_P(p, fine)

    assert r_fine <= 1e-3
    assert r_coarse / r_fine == pytest.approx(4.0, rel=0.2)


def test_tau_maximality_picks_the_speed_end_of_a_vanishing_level() -> None:
    p, e = _baseline_extremal(20)
    te = lift_extremal(p, e, VProfile.identity(p.a, p.b, 20))

    report = maximality_check_Ptau(p, te, (-4.0, 4.0))

    assert abs(report.worst_gap) <= 1e-9
    assert len(report.argmax_found) == 2
    assert report.box[0] == (0.5, 1.5)


def test_lift_then_project_recovers_the_adjoint() -> None:
    p, e = _lq_extremal(40)

    back = project_extremal(p, lift_extremal(p, e, VProfile.identity(p.a, p.b, 40)))

    assert torch.equal(back.psi.values, e.psi.values)
    assert torch.equal(back.pair.x.values, e.pair.x.values)
    assert back.psi0 == -1.0


def test_two_step_lift_then_project_keeps_residual_and_gap() -> None:
    p, e = _lq_extremal(40)
    profile = VProfile.two_step(p.a, p.b, 40, 0.5, 1.5)
    residual = adjoint_residual_P(p, e)
    gap = maximality_check_P(p, e, (-4.0, 4.0)).worst_gap

    te = lift_extremal(p, e, profile)
    back = project_extremal(p, te)

    h = float(e.pair.x.steps.max())
    assert float((back.psi.values - e.psi.values).abs().max()) <= 2 * h
    assert back.pair.nodes.shape == e.pair.nodes.shape
    assert adjoint_residual_P(p, back) == pytest.approx(residual, rel=1e-9, abs=1e-12)
    assert maximality_check_P(p, back, (-4.0, 4.0)).worst_gap == pytest.approx(gap, rel=1e-9, abs=1e-12)
    # On the tau-grid the p_z residual is the same residual scaled by the cell speed.
    assert adjoint_residual_Ptau(p, te)["p_z"] <= 1.5 * residual + 1e-9


def test_abnormal_multiplier_survives_lift_and_projection() -> None:
    p = load_problem(get_builtin_path("baseline"))
    e = make_extremal(default_pair(p, 20), 0.0, [1.0])

    te = lift_extremal(p, e, VProfile.two_step(p.a, p.b, 20, 0.5, 1.5))
    back = project_extremal(p, te)

    assert classify_abnormal(e)
    assert te.p0 == 0.0 and classify_abnormal(te)
    assert back.psi0 == 0.0 and classify_abnormal(back)
    assert back.psi.sup_norm() == pytest.approx(1.0, abs=1e-12)
    # With psi0 = 0 the Hamiltonian along u = 1 is psi * u = 1, so p_t = -1.
    assert bool(((te.p_t.values + 1.0).abs() <= 1e-12).all())


def test_multipliers_are_normalized() -> None:
    p = load_problem(get_builtin_path("baseline"))
    pair = default_pair(p, 4)

    normal = make_extremal(pair, -2.0, [4.0])
    abnormal = make_extremal(pair, 0.0, [-3.0])

    assert normal.psi0 == -1.0
    assert normal.psi.values[:, 0].tolist() == [2.0] * 5
    assert classify_abnormal(abnormal)
    assert abnormal.psi.sup_norm() == 1.0
    with pytest.raises(InvariantError, match="must be <= 0"):
        make_extremal(pair, 1.0, [1.0])
    with pytest.raises(InvariantError, match="must not vanish together"):
        make_extremal(pair, 0.0, [0.0])


def test_candidate_controls_must_lie_in_the_box() -> None:
    p, e = _baseline_extremal(10)

    with pytest.raises(InvariantError, match="outside the box"):
        maximality_check_P(p, e, (-0.5, 0.5))


def test_verify_extremal_reports_every_profile() -> None:
    p, e = _baseline_extremal(20)
    profiles = {
        "identity": VProfile.identity(p.a, p.b, 20),
        "two-step": VProfile.two_step(p.a, p.b, 20, 0.5, 1.5),
    }

    report = verify_extremal(p, e, (-4.0, 4.0), profiles=profiles)

    assert set(report["lifts"]) == {"identity", "two-step"}
    assert report["hamiltonian_zero_level_max"] <= 1e-8
    assert report["adjoint_residual"] == 0.0
    assert not report["abnormal"]
