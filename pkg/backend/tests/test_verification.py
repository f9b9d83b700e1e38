import numpy as np
import pytest
from conftest import build_system, symmetry

from app.core.exceptions import InadmissibleFieldError
from app.expr import parse
from app.models.report import CheckEntry, Verdict
from app.models.state import PhaseState
from app.services.dynamics_service import dynamics_service
from app.services.scenario_service import scenario_service
from app.services.symmetry_service import symmetry_service
from app.services.verification_service import relative_drift, verification_service


def short_run(name, steps=300):
    scenario = scenario_service.load_scenario(name)
    traj = dynamics_service.integrate(scenario.system, scenario.initial_state(), scenario.integration.h, steps)
    return scenario, traj


@pytest.fixture(scope="module")
def example2():
    return short_run("example2-energy")


def test_judge_fails_non_finite_residuals():
    assert CheckEntry.judge("x", "", float("nan"), 1.0, 1).verdict == Verdict.FAIL
    assert CheckEntry.judge("x", "", 1.0, 1.0, 1).passed
    assert not CheckEntry.judge("x", "", 0.0, 1.0, 1, passed=False).passed


def test_relative_drift_is_measured_against_the_start():
    assert relative_drift(np.array([2.0, 2.5, 1.0])) == (1.0, 0.5)
    assert relative_drift(np.array([0.0, 1e-3])) == (1e-3, 1e-3)


def test_momentum_integral_along_example1(example1, example1_traj):
    spec = example1.symmetries[0].spec
    full, reduced = verification_service.momentum_equation_report(example1.system, spec, example1_traj)
    assert full.passed and reduced.passed
    series = symmetry_service.noether_series(spec, example1.system, example1_traj)
    entry = verification_service.conservation_report(example1.system, spec, example1_traj, series)
    assert entry.passed, entry.max_residual
    annihilator = verification_service.annihilator_report(example1.system, spec, example1_traj,
                                                          np.random.default_rng(1))
    assert annihilator.passed
    assert verification_service.membership_agreement(spec, reduced, annihilator).passed


def test_px_control_fails_only_the_reduced_equation(example1, example1_traj):
    spec = symmetry("px", xi=["1", "0", "0"])
    full, reduced = verification_service.momentum_equation_report(example1.system, spec, example1_traj)
    annihilator = verification_service.annihilator_report(example1.system, spec, example1_traj,
                                                          np.random.default_rng(1))
    assert full.passed
    assert not reduced.passed
    assert not annihilator.passed
    assert verification_service.membership_agreement(spec, reduced, annihilator).passed


def test_membership_agreement_flags_a_disagreement():
    spec = symmetry("e", xi=["1"])
    passing = CheckEntry.judge("a", "", 0.0, 1.0, 1)
    failing = CheckEntry.judge("b", "", 2.0, 1.0, 1)
    assert not verification_service.membership_agreement(spec, passing, failing).passed


def test_trajectory_summary(example1, example1_traj):
    spec = example1.symmetries[0].spec
    summary = verification_service.trajectory_summary(example1.system, spec, example1_traj)
    assert summary.symmetry == "py"
    assert summary.relative_drift <= 1e-8
    assert summary.manifold_residual <= 1e-10
    assert summary.min_contact is not None


def test_gyroscopic_forces(example2, rng):
    scenario, traj = example2
    assert verification_service.gyroscopic_check(scenario.system, traj=traj, rng=rng).passed
    gravity = build_system(2, {"11": "1", "22": "1"}, force=["0", "-9.81"])
    assert not verification_service.gyroscopic_check(gravity, rng=rng).passed
    free = build_system(2, {"11": "1", "22": "1"})
    assert verification_service.gyroscopic_check(free, rng=rng).passed


def test_energy_is_a_moving_energy_for_example2(example2, rng):
    scenario, traj = example2
    case = scenario.symmetries[0]
    entry = verification_service.moving_energy_report(scenario.system, case.spec, case.xi0, traj, rng=rng)
    assert entry.passed, entry.details


def test_gauge_integral_drifts_once_the_lorentz_term_is_on():
    scenario, traj = short_run("example1-gauge-control", steps=1000)
    spec = scenario.symmetries[0].spec
    entry = verification_service.conservation_report(scenario.system, spec, traj, tolerance=scenario.tolerances.drift)
    assert not entry.passed
    assert entry.max_residual > 1e-3
    assert entry.details["absolute_drift"] > 1e-3


def test_inadmissible_reference_field_is_rejected(example2, rng):
    scenario, traj = example2
    case = scenario.symmetries[0]
    with pytest.raises(InadmissibleFieldError):
        verification_service.moving_energy_report(
            scenario.system, case.spec, (parse("1"), parse("0"), parse("0")), traj, rng=rng
        )


def test_multiplier_oracle(example1, example1_traj, rng):
    entry = verification_service.multiplier_oracle_report(example1.system, example1_traj, rng, count=10)
    assert entry.passed, entry.max_residual
    assert entry.samples == 10


def test_multiplier_oracle_is_trivial_without_constraints(unit_free_particle):
    state = PhaseState(0.0, np.zeros(3), np.ones(3))
    assert verification_service.multiplier_oracle_check(unit_free_particle, state) == 0.0


def test_subset_along_example1(example1, example1_traj, rng):
    entry = verification_service.subset_check(example1.system, n_directions=6, n_samples=8,
                                              traj=example1_traj, rng=rng)
    assert entry.passed
    assert entry.details["controls_failed"] == 6


def test_subset_is_vacuous_without_constraints(unit_free_particle):
    entry = verification_service.subset_check(unit_free_particle)
    assert entry.passed and entry.samples == 0


def test_invariance_and_equivalence_for_the_gauge_field():
    scenario, traj = short_run("example1-gauge", steps=100)
    spec = scenario.symmetries[0].spec
    rng = np.random.default_rng(7)
    assert verification_service.invariance_report(scenario.system, spec, traj, rng, count=20).passed
    assert verification_service.lagrangian_equivalence_report(scenario.system, spec, traj, rng, count=20).passed


def test_point_identities_on_the_free_potential_system():
    scenario, traj = short_run("free-potential-bracket", steps=100)
    for case in scenario.symmetries:
        assert verification_service.weak_noether_report(scenario.system, case.spec, traj).passed
        assert verification_service.bracket_report(scenario.system, case.spec, traj).passed
        assert verification_service.noether_invariance_report(scenario.system, case.spec, traj).passed
        assert verification_service.contraction_identity_report(scenario.system, case.spec, traj).passed


def test_generalized_report_needs_gamma():
    scenario, traj = short_run("generalized-synthetic", steps=100)
    case = scenario.symmetries[0]
    assert verification_service.generalized_symmetry_report(scenario.system, case.spec, case.gamma, traj).passed
    without = verification_service.generalized_symmetry_report(scenario.system, case.spec, None, traj)
    assert not without.passed
    assert without.details["residual_a"] > 1e-3
