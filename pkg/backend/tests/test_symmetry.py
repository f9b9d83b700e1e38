import numpy as np
import pytest
from conftest import build_system, symmetry

from app.core.exceptions import SymmetryError
from app.expr import ZERO, parse
from app.models.state import PhaseState
from app.models.symmetry import OneForm, SymmetrySpec
from app.services.constraint_service import constraint_service
from app.services.mechanics_service import mechanics_service
from app.services.scenario_service import scenario_service
from app.services.symmetry_service import symmetry_service


def chart_states(sys, rng, count=20, radius=5.0):
    for _ in range(count):
        t, q = float(rng.uniform(0, 5)), rng.standard_normal(sys.n)
        yield PhaseState(t, q, constraint_service.admissible_chart(sys, t, q).sample(rng, radius))


def free_states(n, rng, count=20):
    for _ in range(count):
        yield PhaseState(float(rng.uniform(0, 5)), rng.standard_normal(n), 3 * rng.standard_normal(n))


@pytest.fixture(scope="module")
def gauge():
    return scenario_service.load_scenario("example1-gauge")


@pytest.fixture(scope="module")
def free_potential():
    return scenario_service.load_scenario("free-potential-bracket")


@pytest.fixture(scope="module")
def potential():
    return scenario_service.load_scenario("example1-potential")


def twisted(n=2):
    """A field with every dependency switched on, including a closed beta"""
    beta = OneForm(ZERO, (parse("q2"), parse("q1")), (ZERO,) * n)
    return SymmetrySpec(
        label="twisted",
        tau=parse("1 + 0.1*q1"),
        xi=(parse("sin(t)"), parse("q1*q2")),
        gauge=parse("t*q1 + p2"),
        beta=beta,
    )


def twisted_3d():
    return symmetry("twisted", tau="1 + 0.1*q1", xi=["sin(t)", "q1*q3", "q2"], gauge="t*q1 + p2")


def test_noether_function_of_the_momentum_integral(example1):
    spec = example1.symmetries[0].spec
    state = PhaseState(2.0, [0.4, 1.0, 0.3], [1.0, 0.5, 0.7])
    expected = 0.5 - (1 * 9.81 * 0.5 * 2.0 - 0.5 * 0.4)
    assert symmetry_service.noether_function(spec, example1.system, state) == pytest.approx(expected)


def test_time_translation_gives_minus_the_energy(coupled_system):
    spec = SymmetrySpec.time_translation(2)
    state = PhaseState(0.3, [0.2, 0.1], [1.0, -1.0])
    H = mechanics_service.hamiltonian_partials(coupled_system, state).H
    assert symmetry_service.noether_function(spec, coupled_system, state) == pytest.approx(-H)


def test_prolongation_of_a_rotation():
    spec = symmetry("rotation", xi=["-q2", "q1"])
    sys = build_system(2, {"11": "1", "22": "1"})
    field = symmetry_service.prolong_full(spec, sys, PhaseState(0.0, [1.0, 2.0], [3.0, 4.0]))
    assert field.dt == 0.0
    assert np.allclose(field.dq, [-2.0, 1.0])
    assert np.allclose(field.dp, [-4.0, 3.0])


def test_gauge_field_is_invariant_only_on_the_manifold(gauge, rng):
    spec, sys = gauge.symmetries[0].spec, gauge.system
    for state in chart_states(sys, rng):
        assert abs(symmetry_service.invariance_residual(spec, sys, state)) <= 1e-10
    off = [abs(symmetry_service.invariance_residual(spec, sys, state)) for state in free_states(3, rng)]
    assert max(off) > 1e-3


def test_lagrangian_residual_is_minus_the_hamiltonian_one(coupled_system, rng):
    spec = twisted()
    plain = SymmetrySpec(label="plain", tau=spec.tau, xi=spec.xi)
    for state in free_states(2, rng):
        qdot = mechanics_service.hamiltonian_partials(coupled_system, state).H_p
        r_h = symmetry_service.invariance_residual(spec, coupled_system, state)
        r_l = symmetry_service.lagrangian_invariance_residual(spec, coupled_system, state.t, state.q, qdot)
        assert r_l == pytest.approx(-r_h, rel=1e-9, abs=1e-10)
        j_h = symmetry_service.noether_function(plain, coupled_system, state)
        j_l = symmetry_service.lagrangian_noether(spec, coupled_system, state.t, state.q, qdot)
        assert j_l == pytest.approx(j_h, rel=1e-10, abs=1e-10)


def test_contraction_identity_holds_for_any_field(coupled_system, rng):
    spec = twisted()
    for state in free_states(2, rng):
        residual = symmetry_service.contraction_identity_residual(spec, coupled_system, state)
        assert np.max(np.abs(residual)) <= 1e-9


def test_noether_gradient_matches_finite_differences(coupled_system):
    spec = twisted()
    state = PhaseState(0.4, [0.3, -0.7], [1.2, 0.5])
    gradient = symmetry_service.noether_gradient(spec, coupled_system, state)
    x = state.as_vector()
    step = 1e-6
    for a in range(x.size):
        shift = np.zeros(x.size)
        shift[a] = step
        plus = symmetry_service.noether_function(spec, coupled_system, PhaseState.from_vector(x + shift))
        minus = symmetry_service.noether_function(spec, coupled_system, PhaseState.from_vector(x - shift))
        assert gradient[a] == pytest.approx((plus - minus) / (2 * step), rel=1e-6, abs=1e-7)


def test_closed_and_non_closed_forms():
    exact = OneForm(ZERO, (parse("q2"), parse("q1")), (ZERO, ZERO))
    assert symmetry_service.check_closed(exact).passed
    rotational = OneForm(ZERO, (parse("-q2"), parse("q1")), (ZERO, ZERO))
    result = symmetry_service.check_closed(rotational)
    assert not result.passed
    assert result.residual == pytest.approx(2.0)


def test_weak_noether_on_the_constrained_manifold(potential, rng):
    spec, sys = potential.symmetries[0].spec, potential.system
    for state in chart_states(sys, rng):
        assert np.max(np.abs(symmetry_service.weak_noether_residual(spec, sys, state))) <= 1e-9


def test_bracket_and_invariance_of_free_weak_symmetries(free_potential, rng):
    sys = free_potential.system
    for case in free_potential.symmetries:
        for state in free_states(3, rng, count=10):
            assert np.max(np.abs(symmetry_service.bracket_defect(case.spec, sys, state))) <= 1e-9
            assert abs(symmetry_service.noether_invariance(case.spec, sys, state)) <= 1e-9


def test_bracket_detects_a_non_symmetry(free_potential):
    spec = symmetry("px", xi=["1", "0", "0"])
    state = PhaseState(0.0, [0.0, 1.0, 0.0], [1.0, 0.5, 0.2])
    assert np.max(np.abs(symmetry_service.bracket_defect(spec, free_potential.system, state))) > 1e-3


def test_bracket_requires_a_free_system(example1):
    spec = example1.symmetries[0].spec
    with pytest.raises(SymmetryError):
        symmetry_service.bracket_defect(spec, example1.system, PhaseState(0.0, [0, 1, 0], [1, 0.5, 1.1]))


def test_dimension_mismatch_is_rejected(example1):
    with pytest.raises(SymmetryError):
        symmetry_service.noether_function(symmetry("short", xi=["1"]), example1.system,
                                          PhaseState(0.0, [0, 1, 0], [1, 0.5, 1.1]))


def test_momentum_balance_full_form_is_exact(example1, rng):
    sys = example1.system
    for spec in (example1.symmetries[0].spec, symmetry("px", xi=["1", "0", "0"]), twisted_3d()):
        for state in chart_states(sys, rng, count=10):
            lhs, full, _ = symmetry_service.momentum_balance(spec, sys, state)
            assert lhs == pytest.approx(full, rel=1e-9, abs=1e-9)


def test_reduced_form_misses_the_reaction_power(example1, rng):
    sys = example1.system
    spec = symmetry("px", xi=["1", "0", "0"])
    gaps = []
    for state in chart_states(sys, rng, count=10):
        lhs, _, reduced = symmetry_service.momentum_balance(spec, sys, state)
        gaps.append(abs(lhs - reduced))
    assert max(gaps) > 1e-3


def test_generalized_residuals_vanish_for_the_synthetic_pair(rng):
    scenario = scenario_service.load_scenario("generalized-synthetic")
    case = scenario.symmetries[0]
    for state in chart_states(scenario.system, rng, count=10):
        residual_a, residual_b = symmetry_service.generalized_symmetry_residuals(
            case.spec, case.gamma, scenario.system, state
        )
        assert np.max(np.abs(residual_a)) <= 1e-9
        assert abs(residual_b) <= 1e-9


def test_contact_function_of_a_free_particle(unit_free_particle):
    state = PhaseState(0.0, np.zeros(3), [1.0, 2.0, 2.0])
    assert symmetry_service.contact_function(unit_free_particle, state) == pytest.approx(4.5)