import numpy as np
import pytest
from conftest import build_system

from app.core.exceptions import SingularMultiplierSystemError
from app.models.state import PhaseState
from app.services.constraint_service import constraint_service
from app.services.mechanics_service import mechanics_service
from app.services.verification_service import verification_service


def test_chart_momenta_satisfy_the_constraints(example1, rng):
    sys = example1.system
    for t in (0.0, 0.4, 2.5):
        q = rng.standard_normal(3)
        chart = constraint_service.admissible_chart(sys, t, q)
        assert chart.dimension == 2
        for _ in range(5):
            p = chart.sample(rng, 10.0)
            assert np.max(np.abs(constraint_service.momentum_residual(sys, t, q, p))) < 1e-10


def test_unconstrained_chart_is_everything(unit_free_particle):
    chart = constraint_service.admissible_chart(unit_free_particle, 0.0, np.zeros(3))
    assert chart.dimension == 3
    assert np.allclose(chart.momentum([1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_circle_multiplier_is_centripetal(circle_system):
    # m = 2 on the unit circle: 2 q lambda = -m |v|^2 q
    q = np.array([np.cos(0.3), np.sin(0.3)])
    v = 1.7 * np.array([-q[1], q[0]])
    p = 2.0 * v
    solution = constraint_service.solve_multipliers(circle_system, 0.0, q, p)
    assert solution.lam == pytest.approx([-2.0 * 1.7 ** 2 / 2.0], rel=1e-12)
    assert np.allclose(solution.reaction, 2.0 * q * solution.lam[0])
    assert np.max(np.abs(solution.constraint_rate)) < 1e-12


def test_slider_needs_no_reaction(slider_system):
    solution = constraint_service.solve_multipliers(slider_system, 0.4, np.array([0.4, 1.0]), np.array([1.0, -2.0]))
    assert solution.lam == pytest.approx([0.0], abs=1e-14)


def test_multipliers_keep_constraints_stationary(example1, rng):
    sys = example1.system
    for _ in range(10):
        t, q = float(rng.uniform(0, 5)), rng.standard_normal(3)
        p = constraint_service.admissible_chart(sys, t, q).sample(rng, 5.0)
        solution = constraint_service.solve_multipliers(sys, t, q, p)
        assert np.max(np.abs(solution.constraint_rate)) < 1e-9 * (1 + np.max(np.abs(solution.lam)))
        assert verification_service.multiplier_oracle_check(sys, PhaseState(t, q, p)) < 1e-5


def test_dependent_rows_make_the_multiplier_system_singular():
    sys = build_system(2, {"11": "1", "22": "1"}, kinematic=[{"a1": "1", "a2": "1"}, {"a1": "2", "a2": "2"}])
    with pytest.raises(SingularMultiplierSystemError) as error:
        constraint_service.solve_multipliers(sys, 0.0, np.zeros(2), np.zeros(2))
    assert error.value.rows == ("g1", "g2")


def test_manifold_residual_includes_position_constraints(circle_system):
    on = PhaseState(0.0, [1.0, 0.0], [0.0, 2.0])
    off = PhaseState(0.0, [1.1, 0.0], [0.0, 2.0])
    assert constraint_service.manifold_residual(circle_system, on) == 0.0
    assert constraint_service.manifold_residual(circle_system, off) == pytest.approx(0.21)


def test_virtual_displacements(example1):
    sys = example1.system
    q = np.array([0.0, 1.0, 0.0])
    assert constraint_service.in_virtual_displacements(sys, 0.0, q, [0.0, 1.0, 0.0]).passed
    assert not constraint_service.in_virtual_displacements(sys, 0.0, q, [1.0, 0.0, 0.0]).passed


def test_admissible_pairs_include_the_moving_constraint(example1):
    sys = example1.system
    q = np.array([0.0, 1.0, 0.0])
    a0, _ = mechanics_service.constraint_matrix(sys, 0.0, q)
    # (tau, xi) = (1, (0, 0, -a0)) follows the affine term
    assert constraint_service.in_admissible_hatV(sys, 0.0, q, 1.0, [0.0, 0.0, -a0[0]]).passed
    assert not constraint_service.in_admissible_hatV(sys, 0.0, q, 1.0, [0.0, 0.0, 0.0]).passed


def test_reaction_annihilator_membership(example1, rng):
    sys = example1.system
    q = np.array([0.3, 1.0, -0.2])
    assert constraint_service.in_reaction_annihilator(sys, 0.5, q, 0.0, [0.0, 1.0, 0.0], rng=rng).passed
    result = constraint_service.in_reaction_annihilator(sys, 0.5, q, 0.0, [1.0, 0.0, 0.0], rng=rng)
    assert not result.passed
    assert result.samples == 64


def test_annihilator_is_vacuous_without_constraints(unit_free_particle, rng):
    result = constraint_service.in_reaction_annihilator(unit_free_particle, 0.0, np.zeros(3), 1.0, [5, 5, 5], rng=rng)
    assert result.passed
    assert result.samples == 0


def random_system(rng: np.random.Generator):
    n = int(rng.integers(2, 5))
    k = int(rng.integers(1, min(2, n - 1) + 1))
    mass = {f"{i}{i}": f"1 + {rng.uniform(0.1, 1):.3f}*q{i}^2" for i in range(1, n + 1)}
    force = [f"{rng.uniform(-1, 1):.3f}*p{(i % n) + 1} + {rng.uniform(-1, 1):.3f}" for i in range(n)]
    rows = []
    for _ in range(k):
        row = {"a0": f"{rng.uniform(-1, 1):.3f} + {rng.uniform(-1, 1):.3f}*t*q1"}
        for i in range(1, n + 1):
            row[f"a{i}"] = f"{rng.uniform(-2, 2):.3f} + {rng.uniform(-0.5, 0.5):.3f}*q{(i % n) + 1}"
        rows.append(row)
    return build_system(n, mass, V=f"{rng.uniform(0, 1):.3f}*q1^2", force=force, kinematic=rows)


@pytest.mark.parametrize("seed", range(50))
def test_admissible_directions_annihilate_reactions(seed):
    rng = np.random.default_rng(seed)
    sys = random_system(rng)
    entry = verification_service.subset_check(sys, n_directions=20, n_samples=8, rng=rng)
    assert entry.passed, entry.details
    assert entry.details["controls_failed"] == entry.details["controls"] == 20
