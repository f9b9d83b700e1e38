"""
Verification Service - point-level and trajectory-level checks

Every check returns a CheckEntry carrying its tolerance; the verdict is pass iff
the worst residual is within it. Point checks run either on trajectory states
or on states whose configuration comes from the trajectory and whose momentum
is drawn from the admissible chart with a seeded generator.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space

from app.core.config import settings
from app.core.exceptions import InadmissibleFieldError, SingularMultiplierSystemError
from app.expr import Expr, compile_exprs
from app.models.mechanics import MechSystem
from app.models.report import CheckEntry, TrajectorySummary
from app.models.state import PhaseState, Trajectory
from app.models.symmetry import OneForm, SymmetrySpec
from app.services.constraint_service import constraint_service
from app.services.dynamics_service import dynamics_service
from app.services.mechanics_service import mechanics_service
from app.services.symmetry_service import symmetry_service

logger = logging.getLogger(__name__)

ANCHORS = {
    "momentum_equation_full": "dJ/dt = sum_i (F_i + R_i)(xi_i - tau dH/dp_i) along the constrained flow",
    "momentum_equation_reduced": "dJ/dt = sum_i F_i (xi_i - tau dH/dp_i) when zeta is a section of the reaction annihilator",
    "conservation": "Noether function J is a first integral of the constrained flow",
    "gyroscopic": "gyroscopic force: sum_i F_i dH/dp_i = 0",
    "subset": "admissible directions lie in the reaction-annihilator distribution",
    "moving_energy": "moving energy p.xi - H is preserved iff xi - xi0 annihilates the reactions",
    "multiplier_oracle": "multipliers keep the momentum constraints stationary (finite-difference oracle)",
    "invariance": "invariance condition L_zeta H = p.dxi/dt - H dtau/dt on the constrained manifold",
    "weak_noether": "L_zeta(p dq - H dt + beta) = df on the constrained manifold",
    "bracket": "[Z, zeta] is proportional to Z for weak Noether symmetries",
    "generalized": "L_zeta(alpha + beta) - df = gamma and dalpha(P, zeta) + gamma(Z + P) = 0",
    "lagrangian_equivalence": "Lagrangian and Hamiltonian invariance conditions and Noether functions agree",
    "annihilator": "sum_l lambda_l (a0 tau + a.xi) = 0 for all admissible momenta",
    "membership_agreement": "reduced momentum equation holds iff zeta annihilates the reactions",
    "contraction_identity": "i_zeta dalpha + dJ = L_zeta(alpha + beta) - df",
    "noether_invariance": "L_zeta J = 0 for unconstrained weak Noether symmetries",
    "order": "classical Runge-Kutta global error is fourth order",
}


def relative_drift(series: np.ndarray) -> Tuple[float, float]:
    """(max |J - J0|, that divided by max(|J0|, 1))"""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        return 0.0, 0.0
    absolute = float(np.max(np.abs(series - series[0])))
    return absolute, absolute / max(abs(float(series[0])), 1.0)


def order_estimate(errors: Sequence[float], steps: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(step size)"""
    slope, _ = np.polyfit(np.log(np.asarray(steps, dtype=float)), np.log(np.asarray(errors, dtype=float)), 1)
    return float(slope)


class VerificationService:
    """Service assembling check entries from the numeric services"""

    def sampled_states(self, sys: MechSystem, traj: Trajectory, count: int,
                       rng: np.random.Generator) -> List[PhaseState]:
        """Trajectory configurations with momenta drawn from the admissible chart"""
        states = []
        for index in traj.sample_indices(count):
            t, q = float(traj.t[index]), traj.q[index]
            chart = constraint_service.admissible_chart(sys, t, q)
            states.append(PhaseState(t, q, chart.sample(rng, settings.MEMBERSHIP_RADIUS)))
        return states

    def trajectory_states(self, traj: Trajectory, count: Optional[int] = None) -> List[PhaseState]:
        count = settings.CHECK_SAMPLES if count is None else count
        return [traj.state(index) for index in traj.sample_indices(count)]

    # momentum equation and conservation

    def momentum_equation_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                                 tolerance: Optional[float] = None) -> List[CheckEntry]:
        tolerance = settings.TOL_IDENTITY if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        full, reduced = 0.0, 0.0
        for state in states:
            lhs, rhs_full, rhs_reduced = symmetry_service.momentum_balance(spec, sys, state)
            full = max(full, abs(lhs - rhs_full))
            reduced = max(reduced, abs(lhs - rhs_reduced))
        entries = [
            CheckEntry.judge("momentum_equation_full", ANCHORS["momentum_equation_full"], full, tolerance,
                             len(states), spec.label),
            CheckEntry.judge("momentum_equation_reduced", ANCHORS["momentum_equation_reduced"], reduced,
                             tolerance, len(states), spec.label),
        ]
        logger.debug(f"Momentum equation for {spec.label}: full {full:.3e}, reduced {reduced:.3e}")
        return entries

    def trajectory_summary(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                           series: Optional[np.ndarray] = None) -> TrajectorySummary:
        series = symmetry_service.noether_series(spec, sys, traj) if series is None else series
        absolute, relative = relative_drift(series)
        states = self.trajectory_states(traj)
        energy = [mechanics_service.hamiltonian_partials(sys, state).H for state in states]
        contact = [abs(symmetry_service.contact_function(sys, state, spec.beta)) for state in states]
        return TrajectorySummary(
            symmetry=spec.label,
            initial_value=float(series[0]),
            final_value=float(series[-1]),
            max_abs_drift=absolute,
            relative_drift=relative,
            constraint_drift=float(traj.drift.max()),
            manifold_residual=float(traj.residual.max()),
            energy_drift=relative_drift(np.array(energy))[0],
            min_contact=float(min(contact)) if contact else None,
        )

    def conservation_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                            series: Optional[np.ndarray] = None,
                            tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_DRIFT if tolerance is None else tolerance
        series = symmetry_service.noether_series(spec, sys, traj) if series is None else series
        absolute, relative = relative_drift(series)
        entry = CheckEntry.judge("conservation", ANCHORS["conservation"], relative, tolerance, len(series),
                                 spec.label, absolute_drift=absolute, initial_value=float(series[0]))
        if not entry.passed:
            logger.warning(f"{spec.label}: relative drift {relative:.3e} exceeds {tolerance:.1e}")
        return entry

    # system-level checks

    def gyroscopic_check(self, sys: MechSystem, n_samples: Optional[int] = None,
                         traj: Optional[Trajectory] = None, rng: Optional[np.random.Generator] = None,
                         tolerance: Optional[float] = None) -> CheckEntry:
        """max |F.H_p| / (1 + |F| |H_p|) over sampled on-manifold states"""
        n_samples = settings.MEMBERSHIP_SAMPLES if n_samples is None else n_samples
        tolerance = settings.TOL_IDENTITY if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        if traj is not None:
            states = self.sampled_states(sys, traj, n_samples, rng)
        else:
            states = []
            for _ in range(n_samples):
                t, q = float(rng.standard_normal()), rng.standard_normal(sys.n)
                chart = constraint_service.admissible_chart(sys, t, q)
                states.append(PhaseState(t, q, chart.sample(rng, settings.MEMBERSHIP_RADIUS)))
        worst = 0.0
        for state in states:
            force = mechanics_service.force(sys, state)
            velocity = mechanics_service.hamiltonian_partials(sys, state).H_p
            power = abs(force @ velocity)
            worst = max(worst, power / (1.0 + np.linalg.norm(force) * np.linalg.norm(velocity)))
        return CheckEntry.judge("gyroscopic", ANCHORS["gyroscopic"], worst, tolerance, len(states))

    def admissible_directions(self, sys: MechSystem, t: float, q: np.ndarray, count: int,
                              rng: np.random.Generator) -> np.ndarray:
        """Random (tau, xi) rows solving a0 tau + a.xi = 0"""
        a0, A = mechanics_service.constraint_matrix(sys, t, q)
        augmented = np.hstack((a0[:, None], A))
        basis = null_space(augmented) if sys.k else np.eye(sys.n + 1)
        return (basis @ rng.standard_normal((basis.shape[1], count))).T

    def subset_check(self, sys: MechSystem, n_directions: Optional[int] = None, n_samples: Optional[int] = None,
                     traj: Optional[Trajectory] = None, rng: Optional[np.random.Generator] = None,
                     tolerance: Optional[float] = None, perturbation: float = 1e-2) -> CheckEntry:
        """Admissible directions pass the annihilator test; pushed off by a reaction direction they fail"""
        n_directions = settings.SUBSET_DIRECTIONS if n_directions is None else n_directions
        tolerance = settings.TOL_MEMBERSHIP if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        if sys.k == 0:
            return CheckEntry.judge("subset", ANCHORS["subset"], 0.0, tolerance, 0)
        if traj is not None:
            configurations = [(float(traj.t[i]), traj.q[i]) for i in traj.sample_indices(n_directions)]
        else:
            configurations = [(0.0, rng.standard_normal(sys.n))]
        worst, controls_failed, controls = 0.0, 0, 0
        for index in range(n_directions):
            t, q = configurations[index % len(configurations)]
            tau, *xi = self.admissible_directions(sys, t, q, 1, rng)[0]
            xi = np.array(xi)
            verdict = constraint_service.in_reaction_annihilator(
                sys, t, q, tau, xi, n_samples=n_samples, rng=rng, tolerance=tolerance
            )
            worst = max(worst, verdict.residual)
            _, A = mechanics_service.constraint_matrix(sys, t, q)
            row = A[index % sys.k]
            pushed = xi + perturbation * row / np.linalg.norm(row)
            control = constraint_service.in_reaction_annihilator(
                sys, t, q, tau, pushed, n_samples=n_samples, rng=rng, tolerance=tolerance
            )
            controls += 1
            controls_failed += int(not control.passed)
        passed = worst <= tolerance and controls_failed == controls
        return CheckEntry.judge("subset", ANCHORS["subset"], worst, tolerance, n_directions, passed=passed,
                                controls=controls, controls_failed=controls_failed)

    def multiplier_oracle_check(self, sys: MechSystem, state: PhaseState,
                                h_fd: Optional[float] = None) -> float:
        """Relative difference between solved multipliers and a finite-difference oracle

        The oracle takes explicit Euler steps of size +-h_fd with trial
        multipliers and solves for those whose steps leave the momentum
        constraints unchanged to first order. The central difference keeps
        the truncation error at O(h_fd^2).
        """
        h_fd = settings.ORACLE_STEP if h_fd is None else h_fd
        if sys.k == 0:
            return 0.0
        solved = constraint_service.solve_multipliers(sys, state.t, state.q, state.p).lam
        partials = mechanics_service.hamiltonian_partials(sys, state)
        force = mechanics_service.force(sys, state)
        _, A = mechanics_service.constraint_matrix(sys, state.t, state.q)

        def moved(lam: np.ndarray, h: float) -> np.ndarray:
            pdot = -partials.H_q + force + A.T @ lam
            return constraint_service.momentum_residual(
                sys, state.t + h, state.q + h * partials.H_p, state.p + h * pdot
            )

        def rate(lam: np.ndarray) -> np.ndarray:
            return (moved(lam, h_fd) - moved(lam, -h_fd)) / (2.0 * h_fd)

        offset = rate(np.zeros(sys.k))
        matrix = np.column_stack([rate(unit) - offset for unit in np.eye(sys.k)])
        cond = np.linalg.cond(matrix)
        if not np.isfinite(cond) or cond > settings.CONDITION_LIMIT:
            raise SingularMultiplierSystemError(float(cond), sys.row_labels)
        oracle = np.linalg.solve(matrix, -offset)
        return float(np.linalg.norm(oracle - solved) / max(np.linalg.norm(solved), 1.0))

    def multiplier_oracle_report(self, sys: MechSystem, traj: Trajectory, rng: Optional[np.random.Generator] = None,
                                 count: Optional[int] = None, tolerance: Optional[float] = None) -> CheckEntry:
        count = settings.ORACLE_STATES if count is None else count
        tolerance = settings.TOL_ORACLE if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        states = self.sampled_states(sys, traj, count, rng) if sys.k else []
        worst = max((self.multiplier_oracle_check(sys, state) for state in states), default=0.0)
        return CheckEntry.judge("multiplier_oracle", ANCHORS["multiplier_oracle"], worst, tolerance, len(states))

    def order_report(self, sys: MechSystem, initial: PhaseState, steps: Optional[Sequence[float]] = None,
                     horizon: Optional[float] = None, tolerance: Optional[float] = None) -> CheckEntry:
        """Convergence slope against a reference run with a much finer step, projection off"""
        steps = list(settings.ORDER_STEPS if steps is None else steps)
        horizon = settings.ORDER_HORIZON if horizon is None else horizon
        tolerance = settings.TOL_ORDER if tolerance is None else tolerance
        fine = min(steps) / settings.ORDER_REFERENCE_FACTOR
        reference = dynamics_service.integrate(
            sys, initial, fine, int(round(horizon / fine)), projection=False
        ).final
        errors = []
        for h in steps:
            final = dynamics_service.integrate(sys, initial, h, int(round(horizon / h)), projection=False).final
            errors.append(np.linalg.norm(np.concatenate((final.q - reference.q, final.p - reference.p))))
        slope = order_estimate(errors, steps)
        return CheckEntry.judge("order", ANCHORS["order"], abs(slope - settings.EXPECTED_ORDER), tolerance,
                                len(steps), slope=slope, coarsest_error=errors[0])

    # symmetry-level point checks

    def invariance_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                          rng: Optional[np.random.Generator] = None, count: Optional[int] = None,
                          tolerance: Optional[float] = None) -> CheckEntry:
        count = settings.INVARIANCE_STATES if count is None else count
        tolerance = settings.TOL_INVARIANCE if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        states = self.sampled_states(sys, traj, count, rng)
        worst = max(abs(symmetry_service.invariance_residual(spec, sys, state)) for state in states)
        return CheckEntry.judge("invariance", ANCHORS["invariance"], worst, tolerance, len(states), spec.label)

    def annihilator_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                           rng: Optional[np.random.Generator] = None, count: Optional[int] = None,
                           tolerance: Optional[float] = None) -> CheckEntry:
        count = settings.ANNIHILATOR_STATES if count is None else count
        tolerance = settings.TOL_MEMBERSHIP if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        worst, samples = 0.0, 0
        for index in traj.sample_indices(count):
            t, q = float(traj.t[index]), traj.q[index]
            base = np.array(spec.base_kernel(t, q, (), sys.params))
            verdict = constraint_service.in_reaction_annihilator(
                sys, t, q, base[0], base[1:], rng=rng, tolerance=tolerance
            )
            worst = max(worst, verdict.residual)
            samples += verdict.samples
        return CheckEntry.judge("annihilator", ANCHORS["annihilator"], worst, tolerance, samples, spec.label)

    def membership_agreement(self, spec: SymmetrySpec, reduced: CheckEntry, annihilator: CheckEntry) -> CheckEntry:
        """The reduced momentum check and the annihilator test must agree"""
        agree = reduced.passed == annihilator.passed
        return CheckEntry.judge("membership_agreement", ANCHORS["membership_agreement"], 0.0 if agree else 1.0,
                                0.0, 1, spec.label, passed=agree)

    def weak_noether_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                            tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_EQUIVALENCE if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        worst = max(float(np.max(np.abs(symmetry_service.weak_noether_residual(spec, sys, state))))
                    for state in states)
        return CheckEntry.judge("weak_noether", ANCHORS["weak_noether"], worst, tolerance, len(states), spec.label)

    def contraction_identity_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                                    tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_EQUIVALENCE if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        worst = max(float(np.max(np.abs(symmetry_service.contraction_identity_residual(spec, sys, state))))
                    for state in states)
        return CheckEntry.judge("contraction_identity", ANCHORS["contraction_identity"], worst, tolerance,
                                len(states), spec.label)

    def bracket_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                       tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_BRACKET if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        worst = max(float(np.max(np.abs(symmetry_service.bracket_defect(spec, sys, state)))) for state in states)
        return CheckEntry.judge("bracket", ANCHORS["bracket"], worst, tolerance, len(states), spec.label)

    def noether_invariance_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                                  tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_EQUIVALENCE if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        worst = max(abs(symmetry_service.noether_invariance(spec, sys, state)) for state in states)
        return CheckEntry.judge("noether_invariance", ANCHORS["noether_invariance"], worst, tolerance,
                                len(states), spec.label)

    def generalized_symmetry_report(self, sys: MechSystem, spec: SymmetrySpec, gamma: Optional[OneForm],
                                    traj: Trajectory, tolerance: Optional[float] = None) -> CheckEntry:
        tolerance = settings.TOL_GENERALIZED if tolerance is None else tolerance
        states = self.trajectory_states(traj)
        worst_a, worst_b = 0.0, 0.0
        for state in states:
            residual_a, residual_b = symmetry_service.generalized_symmetry_residuals(spec, gamma, sys, state)
            worst_a = max(worst_a, float(np.max(np.abs(residual_a))))
            worst_b = max(worst_b, abs(residual_b))
        return CheckEntry.judge("generalized", ANCHORS["generalized"], max(worst_a, worst_b), tolerance,
                                len(states), spec.label, residual_a=worst_a, residual_b=worst_b)

    def lagrangian_equivalence_report(self, sys: MechSystem, spec: SymmetrySpec, traj: Trajectory,
                                      rng: Optional[np.random.Generator] = None, count: Optional[int] = None,
                                      tolerance: Optional[float] = None) -> CheckEntry:
        """Residuals satisfy r_L = -r_H and J_L = p.xi - H tau at matched points"""
        count = settings.INVARIANCE_STATES if count is None else count
        tolerance = settings.TOL_EQUIVALENCE if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        plain = SymmetrySpec(label=spec.label, tau=spec.tau, xi=spec.xi)
        states = self.sampled_states(sys, traj, count, rng)
        worst = 0.0
        for state in states:
            qdot = mechanics_service.hamiltonian_partials(sys, state).H_p
            hamiltonian = symmetry_service.invariance_residual(spec, sys, state)
            lagrangian = symmetry_service.lagrangian_invariance_residual(spec, sys, state.t, state.q, qdot)
            j_h = symmetry_service.noether_function(plain, sys, state)
            j_l = symmetry_service.lagrangian_noether(spec, sys, state.t, state.q, qdot)
            scale = 1.0 + max(abs(hamiltonian), abs(j_h))
            worst = max(worst, abs(lagrangian + hamiltonian) / scale, abs(j_l - j_h) / scale)
        return CheckEntry.judge("lagrangian_equivalence", ANCHORS["lagrangian_equivalence"], worst, tolerance,
                                len(states), spec.label)

    def moving_energy_report(self, sys: MechSystem, spec: SymmetrySpec, xi0: Sequence[Expr], traj: Trajectory,
                             series: Optional[np.ndarray] = None, rng: Optional[np.random.Generator] = None,
                             count: Optional[int] = None, tolerance: Optional[float] = None) -> CheckEntry:
        """xi0 must be admissible; pass iff xi - xi0 annihilates reactions and J does not drift"""
        count = settings.ANNIHILATOR_STATES if count is None else count
        tolerance = settings.TOL_DRIFT if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        kernel = compile_exprs(list(xi0))
        membership = 0.0
        for index in traj.sample_indices(count):
            t, q = float(traj.t[index]), traj.q[index]
            field0 = kernel.array(t, q, (), sys.params)
            admissible = constraint_service.velocity_residual(sys, t, q, field0)
            if admissible.size and np.max(np.abs(admissible)) > settings.TOL_MEMBERSHIP:
                raise InadmissibleFieldError(
                    f"xi0 of {spec.label!r} is not an admissible velocity at t={t!r}: "
                    f"residual {np.max(np.abs(admissible)):.3e}"
                )
            xi = np.array(spec.base_kernel(t, q, (), sys.params))[1:]
            verdict = constraint_service.in_reaction_annihilator(sys, t, q, 0.0, xi - field0, rng=rng)
            membership = max(membership, verdict.residual)
        series = symmetry_service.noether_series(spec, sys, traj) if series is None else series
        _, relative = relative_drift(series)
        passed = membership <= settings.TOL_MEMBERSHIP and relative <= tolerance
        return CheckEntry.judge("moving_energy", ANCHORS["moving_energy"], relative, tolerance, len(series),
                                spec.label, passed=passed, annihilator_residual=membership)


verification_service = VerificationService()
