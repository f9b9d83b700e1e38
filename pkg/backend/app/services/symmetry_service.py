"""
Symmetry Service - prolongations, invariance conditions and Noether functions

Coordinates are x = (t, q, p) and alpha = p.dq - H dt, so
dalpha(X, Y) = X_p.Y_q - Y_p.X_q - (dH(X) Y_t - dH(Y) X_t).
For zeta = tau d/dt + xi.d/dq + eta.d/dp with
eta_i = H tau_{q_i} - sum_j xi_{j,q_i} p_j one gets L_zeta alpha = -r dt where r is
the invariance residual, hence with W = L_zeta(alpha + beta) - df and
J = p.xi - H tau + beta(zeta) - f:

    i_zeta dalpha + dJ = W,    dJ/dt = dalpha(P, zeta) + W(Z + P)

along X = Z + P, since i_Z dalpha = 0.
"""
import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import EvaluationDomainError, SymmetryError
from app.expr import ZERO, compile_exprs, diff
from app.expr.calculus import sub
from app.models.mechanics import MechSystem, phase_names
from app.models.state import HamiltonianPartials, MembershipResult, PhaseState, PhaseVectorField, Trajectory
from app.models.symmetry import OneForm, SymmetrySpec
from app.services.constraint_service import constraint_service
from app.services.dynamics_service import dynamics_service
from app.services.mechanics_service import mechanics_service

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SymmetryJet:
    """zeta at a state with its Jacobian over (t, q, p)

    base_z[c, a] is d(tau, xi)_c / dz_a over z = (t, q).
    """

    zeta: np.ndarray
    base_z: np.ndarray
    partials: HamiltonianPartials
    jacobian: Optional[np.ndarray] = None

    @property
    def tau(self) -> float:
        return float(self.zeta[0])

    @property
    def xi(self) -> np.ndarray:
        n = (self.zeta.size - 1) // 2
        return self.zeta[1:n + 1]

    @property
    def eta(self) -> np.ndarray:
        n = (self.zeta.size - 1) // 2
        return self.zeta[n + 1:]


def d_alpha(X: np.ndarray, Y: np.ndarray, dH: np.ndarray) -> float:
    n = (X.size - 1) // 2
    return float(
        X[n + 1:] @ Y[1:n + 1]
        - Y[n + 1:] @ X[1:n + 1]
        - ((dH @ X) * Y[0] - (dH @ Y) * X[0])
    )


def _unpack_pairs(values: np.ndarray, size: int) -> np.ndarray:
    """(..., pairs) over combinations_with_replacement -> (..., size, size)"""
    out = np.empty(values.shape[:-1] + (size, size))
    for index, (a, c) in enumerate(combinations_with_replacement(range(size), 2)):
        out[..., a, c] = values[..., index]
        out[..., c, a] = values[..., index]
    return out


class SymmetryService:
    """Service for symmetry candidates on the extended phase space"""

    def jet(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState, with_jacobian: bool = False,
            partials: Optional[HamiltonianPartials] = None) -> SymmetryJet:
        n = sys.n
        if spec.n != n:
            raise SymmetryError(f"symmetry {spec.label!r} has {spec.n} components, system has {n}")
        t, q, p = state.t, state.q, state.p
        partials = partials or mechanics_service.hamiltonian_partials(sys, state)
        H = partials.H
        base = np.array(spec.base_kernel(t, q, p, sys.params))
        base_z = np.array(spec.base_jacobian_kernel(t, q, p, sys.params)).reshape(n + 1, n + 1)
        tau_q = base_z[0, 1:]
        xi_q = base_z[1:, 1:]
        eta = H * tau_q - xi_q.T @ p
        zeta = np.concatenate((base, eta))
        jacobian = None
        if with_jacobian:
            size = 2 * n + 1
            base_zz = _unpack_pairs(
                np.array(spec.base_hessian_kernel(t, q, p, sys.params)).reshape(n + 1, -1), n + 1
            )
            Hz = np.concatenate(([partials.H_t], partials.H_q))
            jacobian = np.zeros((size, size))
            jacobian[: n + 1, : n + 1] = base_z
            jacobian[n + 1:, : n + 1] = (
                np.outer(tau_q, Hz) + H * base_zz[0, 1:, :] - np.einsum("j,jia->ia", p, base_zz[1:, 1:, :])
            )
            jacobian[n + 1:, n + 1:] = np.outer(tau_q, partials.H_p) - xi_q.T
        return SymmetryJet(zeta=zeta, base_z=base_z, partials=partials, jacobian=jacobian)

    def prolong_full(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> PhaseVectorField:
        return PhaseVectorField.from_vector(self.jet(spec, sys, state).zeta)

    def _invariance(self, jet: SymmetryJet, state: PhaseState) -> float:
        d = jet.partials
        xi_t = jet.base_z[1:, 0]
        tau_t = jet.base_z[0, 0]
        lie = jet.tau * d.H_t + jet.xi @ d.H_q + jet.eta @ d.H_p
        return float(lie - (state.p @ xi_t - d.H * tau_t))

    def invariance_residual(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> float:
        """L_zeta H - (p.xi_t - H tau_t)"""
        return self._invariance(self.jet(spec, sys, state), state)

    def lagrangian_invariance_residual(self, spec: SymmetrySpec, sys: MechSystem, t: float, q: np.ndarray,
                                       qdot: np.ndarray) -> float:
        """L_q.xi + L_qdot.nu + L_t tau + L (tau_t + tau_q.qdot)

        At Legendre-matched points this equals minus invariance_residual.
        """
        qdot = np.asarray(qdot, dtype=float)
        n = sys.n
        lp = mechanics_service.lagrangian_partials(sys, t, q, qdot)
        base = np.array(spec.base_kernel(t, q, (), sys.params))
        base_z = np.array(spec.base_jacobian_kernel(t, q, (), sys.params)).reshape(n + 1, n + 1)
        total = base_z[:, 0] + base_z[:, 1:] @ qdot
        nu = total[1:] - qdot * total[0]
        return float(lp.L_q @ base[1:] + lp.L_qdot @ nu + lp.L_t * base[0] + lp.L * total[0])

    def _gauge(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> Tuple[float, np.ndarray]:
        if spec.gauge == ZERO:
            return 0.0, np.zeros(2 * sys.n + 1)
        values = np.array(spec.gauge_kernel(state.t, state.q, state.p, sys.params))
        return float(values[0]), values[1:]

    def _beta_terms(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState,
                    jet: SymmetryJet) -> Tuple[float, np.ndarray]:
        """beta(zeta) and d(beta(zeta))"""
        size = 2 * sys.n + 1
        if not spec.has_beta:
            return 0.0, np.zeros(size)
        beta = np.array(spec.beta.kernel(state.t, state.q, state.p, sys.params))
        beta_x = np.array(spec.beta.jacobian_kernel(state.t, state.q, state.p, sys.params)).reshape(size, size)
        return float(beta @ jet.zeta), beta_x.T @ jet.zeta + jet.jacobian.T @ beta

    def noether_function(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> float:
        """J = p.xi - H tau + beta(zeta) - f"""
        jet = self.jet(spec, sys, state, with_jacobian=spec.has_beta)
        return self._noether(spec, sys, state, jet)

    def _noether(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState, jet: SymmetryJet) -> float:
        f, _ = self._gauge(spec, sys, state)
        beta_zeta, _ = self._beta_terms(spec, sys, state, jet)
        return float(state.p @ jet.xi - jet.partials.H * jet.tau + beta_zeta - f)

    def noether_gradient(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState,
                         jet: Optional[SymmetryJet] = None) -> np.ndarray:
        """dJ over (t, q, p) from exact partials"""
        n = sys.n
        jet = jet or self.jet(spec, sys, state, with_jacobian=True)
        d = jet.partials
        grad = np.zeros(2 * n + 1)
        grad[: n + 1] += jet.base_z[1:].T @ state.p
        grad[n + 1:] += jet.xi
        grad -= jet.tau * d.gradient
        grad[: n + 1] -= d.H * jet.base_z[0]
        _, d_beta = self._beta_terms(spec, sys, state, jet)
        _, df = self._gauge(spec, sys, state)
        return grad + d_beta - df

    def lagrangian_noether(self, spec: SymmetrySpec, sys: MechSystem, t: float, q: np.ndarray,
                           qdot: np.ndarray) -> float:
        """J = L_qdot.(xi - tau qdot) + L tau"""
        qdot = np.asarray(qdot, dtype=float)
        lp = mechanics_service.lagrangian_partials(sys, t, q, qdot)
        base = np.array(spec.base_kernel(t, q, (), sys.params))
        tau, xi = base[0], base[1:]
        return float(lp.L_qdot @ (xi - tau * qdot) + lp.L * tau)

    def check_closed(self, beta: OneForm, params: Optional[Dict[str, float]] = None,
                     rng: Optional[np.random.Generator] = None) -> MembershipResult:
        """Antisymmetrized mixed partials; numeric sampling when folding leaves terms"""
        names = phase_names(beta.n)
        components = beta.components
        leftovers = []
        for a in range(len(names)):
            for c in range(a + 1, len(names)):
                residual = sub(diff(components[a], names[c]), diff(components[c], names[a]))
                if residual != ZERO:
                    leftovers.append(residual)
        if not leftovers:
            return MembershipResult(True, 0.0, 0)
        kernel = compile_exprs(leftovers)
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        params = params or {}
        worst, evaluated = 0.0, 0
        for _ in range(settings.CLOSEDNESS_POINTS):
            x = rng.standard_normal(len(names))
            try:
                values = kernel(x[0], x[1:beta.n + 1], x[beta.n + 1:], params)
            except (EvaluationDomainError, ArithmeticError, ValueError):
                continue
            evaluated += 1
            worst = max(worst, float(np.max(np.abs(values))))
        if evaluated == 0:
            logger.warning("Closedness check could not evaluate beta at any sample point")
            return MembershipResult(False, float("inf"), 0)
        return MembershipResult(worst <= settings.TOL_CLOSED, worst, evaluated)

    def _weak_noether_covector(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState,
                               jet: SymmetryJet) -> np.ndarray:
        """W = L_zeta(alpha + beta) - df, not yet restricted"""
        covector = np.zeros(2 * sys.n + 1)
        covector[0] = -self._invariance(jet, state)
        _, d_beta = self._beta_terms(spec, sys, state, jet)
        _, df = self._gauge(spec, sys, state)
        return covector + d_beta - df

    def restrict_to_manifold(self, sys: MechSystem, state: PhaseState, covector: np.ndarray) -> np.ndarray:
        """Remove the component along the conormal rows of the constrained manifold"""
        conormal = constraint_service.momentum_constraint_differential(sys, state)
        if conormal.shape[0] == 0:
            return covector
        coefficients = np.linalg.lstsq(conormal.T, covector, rcond=None)[0]
        return covector - conormal.T @ coefficients

    def weak_noether_residual(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> np.ndarray:
        """L_zeta(alpha + beta) - df restricted to the constrained manifold"""
        jet = self.jet(spec, sys, state, with_jacobian=spec.has_beta)
        return self.restrict_to_manifold(sys, state, self._weak_noether_covector(spec, sys, state, jet))

    def hamiltonian_field(self, partials: HamiltonianPartials) -> np.ndarray:
        """Z = d/dt + H_p.d/dq - H_q.d/dp"""
        return np.concatenate(([1.0], partials.H_p, -partials.H_q))

    def generalized_symmetry_residuals(self, spec: SymmetrySpec, gamma: Optional[OneForm], sys: MechSystem,
                                       state: PhaseState,
                                       P: Optional[PhaseVectorField] = None) -> Tuple[np.ndarray, float]:
        """(W - gamma restricted to the manifold, dalpha(P, zeta) + gamma(Z + P))"""
        jet = self.jet(spec, sys, state, with_jacobian=spec.has_beta)
        size = 2 * sys.n + 1
        gamma_value = np.zeros(size)
        if gamma is not None:
            gamma_value = np.array(gamma.kernel(state.t, state.q, state.p, sys.params))
        P = P if P is not None else dynamics_service.perturbation(sys, state)
        perturbation = P.as_vector()
        covector = self._weak_noether_covector(spec, sys, state, jet) - gamma_value
        residual_a = self.restrict_to_manifold(sys, state, covector)
        flow = self.hamiltonian_field(jet.partials) + perturbation
        residual_b = d_alpha(perturbation, jet.zeta, jet.partials.gradient) + gamma_value @ flow
        return residual_a, float(residual_b)

    def contraction_identity_residual(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> np.ndarray:
        """i_zeta dalpha + dJ - W, identically zero"""
        n = sys.n
        jet = self.jet(spec, sys, state, with_jacobian=True)
        d = jet.partials
        contraction = np.zeros(2 * n + 1)
        contraction[0] = -(d.gradient @ jet.zeta) + jet.tau * d.H_t
        contraction[1:n + 1] = jet.eta + jet.tau * d.H_q
        contraction[n + 1:] = -jet.xi + jet.tau * d.H_p
        dJ = self.noether_gradient(spec, sys, state, jet)
        return contraction + dJ - self._weak_noether_covector(spec, sys, state, jet)

    def bracket_defect(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> np.ndarray:
        """[Z, zeta] - c Z with c the dt-component of [Z, zeta]"""
        if sys.k or not sys.force.is_zero:
            raise SymmetryError("the bracket check applies to unconstrained systems without forces")
        n = sys.n
        partials = mechanics_service.hamiltonian_partials(sys, state, second_order=True)
        jet = self.jet(spec, sys, state, with_jacobian=True, partials=partials)
        Z = self.hamiltonian_field(partials)
        DZ = np.zeros((2 * n + 1, 2 * n + 1))
        DZ[1:n + 1] = partials.hessian[n + 1:]
        DZ[n + 1:] = -partials.hessian[1:n + 1]
        bracket = jet.jacobian @ Z - DZ @ jet.zeta
        return bracket - bracket[0] * Z

    def noether_invariance(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> float:
        """L_zeta J"""
        jet = self.jet(spec, sys, state, with_jacobian=True)
        return float(self.noether_gradient(spec, sys, state, jet) @ jet.zeta)

    def contact_function(self, sys: MechSystem, state: PhaseState, beta: Optional[OneForm] = None) -> float:
        """rho = p.H_p - H (+ beta(Z))"""
        partials = mechanics_service.hamiltonian_partials(sys, state)
        rho = float(state.p @ partials.H_p - partials.H)
        if beta is not None and not beta.is_zero:
            rho += float(np.array(beta.kernel(state.t, state.q, state.p, sys.params)) @ self.hamiltonian_field(partials))
        return rho

    def noether_series(self, spec: SymmetrySpec, sys: MechSystem, traj: Trajectory) -> np.ndarray:
        return np.array([self.noether_function(spec, sys, state) for state in traj.states()])

    def momentum_balance(self, spec: SymmetrySpec, sys: MechSystem, state: PhaseState) -> Tuple[float, float, float]:
        """(dJ/dt along the field, full right-hand side, reduced right-hand side)

        full:    (F + R).(xi - tau H_p) + W(Z + P)
        reduced:  F.(xi - tau H_p) + W(Z + P)
        """
        field, solution = dynamics_service.field_with_multipliers(sys, state)
        jet = self.jet(spec, sys, state, with_jacobian=True)
        force = mechanics_service.force(sys, state)
        flow = field.as_vector()
        lhs = float(self.noether_gradient(spec, sys, state, jet) @ flow)
        lever = jet.xi - jet.tau * jet.partials.H_p
        defect = float(self._weak_noether_covector(spec, sys, state, jet) @ flow)
        full = float((force + solution.reaction) @ lever) + defect
        reduced = float(force @ lever) + defect
        return lhs, full, reduced


symmetry_service = SymmetryService()
