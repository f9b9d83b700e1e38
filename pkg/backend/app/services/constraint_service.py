"""
Constraint Service - residuals, Lagrange multipliers and distribution membership

Rows are a0 + A.qdot = 0. On the momentum side g = a0 + A.H_p with
H_p = M^-1 (p - b), so g is affine in p. The multipliers follow from
requiring dg/dt = 0 along qdot = H_p, pdot = -H_q + F + A^T lambda:

    (A M^-1 A^T) lambda = -(g_t + g_q.H_p + A M^-1 (-H_q + F))
"""
import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import SingularMultiplierSystemError
from app.models.mechanics import MechSystem
from app.models.state import (
    AdmissibleMomentumChart,
    HamiltonianPartials,
    MembershipResult,
    MultiplierSolution,
    PhaseState,
)
from app.services.mechanics_service import mechanics_service

logger = logging.getLogger(__name__)


class ConstraintService:
    """Service for constraint residuals, multipliers and membership tests"""

    def velocity_residual(self, sys: MechSystem, t: float, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        a0, A = mechanics_service.constraint_matrix(sys, t, q)
        return a0 + A @ np.asarray(qdot, dtype=float)

    def momentum_residual(self, sys: MechSystem, t: float, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        if sys.k == 0:
            return np.zeros(0)
        partials = mechanics_service.hamiltonian_partials(sys, PhaseState(t, q, p))
        return self.velocity_residual(sys, t, q, partials.H_p)

    def manifold_residual(self, sys: MechSystem, state: PhaseState) -> float:
        """Largest |g| or |f| at the state; 0 when unconstrained"""
        if sys.k == 0:
            return 0.0
        g = self.momentum_residual(sys, state.t, state.q, state.p)
        f = mechanics_service.holonomic_residual(sys, state.t, state.q)
        return float(np.max(np.abs(np.concatenate((g, f)))))

    def constraint_gradient(self, sys: MechSystem, state: PhaseState, partials: HamiltonianPartials) -> np.ndarray:
        """dg/dz over z = (t, q), shape (k, n+1)"""
        _, A = mechanics_service.constraint_matrix(sys, state.t, state.q)
        a0z, Az = mechanics_service.constraint_matrix_gradient(sys, state.t, state.q)
        v = partials.H_p
        return a0z.T + np.einsum("akn,n->ka", Az, v) + A @ partials.velocity_z.T

    def momentum_constraint_differential(self, sys: MechSystem, state: PhaseState) -> np.ndarray:
        """Conormal rows of the constrained manifold in (t, q, p)

        One dg row per constraint followed by one df row per holonomic
        constraint.
        """
        n = sys.n
        if sys.k == 0:
            return np.zeros((0, 2 * n + 1))
        partials = mechanics_service.hamiltonian_partials(sys, state)
        a0, A = mechanics_service.constraint_matrix(sys, state.t, state.q)
        dg = np.hstack((self.constraint_gradient(sys, state, partials), A @ partials.H_pp))
        holonomic = [index for index, row in enumerate(sys.rows) if row.is_holonomic]
        df = np.hstack((a0[holonomic, None], A[holonomic], np.zeros((len(holonomic), n))))
        return np.vstack((dg, df))

    def admissible_chart(self, sys: MechSystem, t: float, q: np.ndarray) -> AdmissibleMomentumChart:
        n = sys.n
        if sys.k == 0:
            return AdmissibleMomentumChart(p_star=np.zeros(n), basis=np.eye(n))
        a0, A = mechanics_service.constraint_matrix(sys, t, q)
        mechanics_service.check_rank(sys, A)
        inverse, b = mechanics_service.inverse_mass(sys, t, q)
        B = A @ inverse
        # g = a0 + B (p - b) = 0
        p_star = np.linalg.lstsq(B, B @ b - a0, rcond=None)[0]
        return AdmissibleMomentumChart(p_star=p_star, basis=linalg.null_space(B))

    def solve_multipliers(self, sys: MechSystem, t: float, q: np.ndarray, p: np.ndarray,
                          partials: Optional[HamiltonianPartials] = None,
                          force: Optional[np.ndarray] = None) -> MultiplierSolution:
        state = PhaseState(t, q, p)
        if sys.k == 0:
            return MultiplierSolution.empty(sys.n)
        partials = partials or mechanics_service.hamiltonian_partials(sys, state)
        force = mechanics_service.force(sys, state) if force is None else force
        _, A = mechanics_service.constraint_matrix(sys, t, q)
        gz = self.constraint_gradient(sys, state, partials)
        rate_free = gz @ np.concatenate(([1.0], partials.H_p))
        B = A @ partials.H_pp
        system = B @ A.T
        rhs = -(rate_free + B @ (force - partials.H_q))
        conditioning = float(np.linalg.cond(system))
        if not np.isfinite(conditioning) or conditioning > settings.CONDITION_LIMIT:
            raise SingularMultiplierSystemError(conditioning, sys.row_labels)
        try:
            lam = linalg.solve(system, rhs, assume_a="pos", check_finite=False)
        except linalg.LinAlgError as exc:
            raise SingularMultiplierSystemError(conditioning, sys.row_labels) from exc
        reaction = A.T @ lam
        rate = rate_free + B @ (force - partials.H_q + reaction)
        return MultiplierSolution(lam=lam, reaction=reaction, conditioning=conditioning, constraint_rate=rate)

    # membership

    def in_virtual_displacements(self, sys: MechSystem, t: float, q: np.ndarray, xi: Sequence[float],
                                 tolerance: Optional[float] = None) -> MembershipResult:
        """sum_i a_i xi_i = 0 for every row"""
        return self.in_admissible_hatV(sys, t, q, 0.0, xi, tolerance)

    def in_admissible_hatV(self, sys: MechSystem, t: float, q: np.ndarray, tau: float, xi: Sequence[float],
                           tolerance: Optional[float] = None) -> MembershipResult:
        """a0 tau + sum_i a_i xi_i = 0 for every row"""
        tolerance = settings.TOL_MEMBERSHIP if tolerance is None else tolerance
        if sys.k == 0:
            return MembershipResult(True, 0.0)
        a0, A = mechanics_service.constraint_matrix(sys, t, q)
        residual = float(np.max(np.abs(a0 * tau + A @ np.asarray(xi, dtype=float))))
        return MembershipResult(residual <= tolerance, residual)

    def in_reaction_annihilator(self, sys: MechSystem, t: float, q: np.ndarray, tau: float, xi: Sequence[float],
                                n_samples: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                                radius: Optional[float] = None, tolerance: Optional[float] = None) -> MembershipResult:
        """Sampled test of sum_i R_i (xi_i - tau H_p_i) = 0 over admissible momenta

        The returned residual is the worst |R.(xi - tau H_p)| / (1 + |R|).
        """
        n_samples = settings.MEMBERSHIP_SAMPLES if n_samples is None else n_samples
        radius = settings.MEMBERSHIP_RADIUS if radius is None else radius
        tolerance = settings.TOL_MEMBERSHIP if tolerance is None else tolerance
        rng = rng if rng is not None else np.random.default_rng(settings.DEFAULT_SEED)
        if sys.k == 0:
            return MembershipResult(True, 0.0, 0)
        xi = np.asarray(xi, dtype=float)
        chart = self.admissible_chart(sys, t, q)
        count = n_samples if chart.dimension else 1
        worst = 0.0
        for _ in range(count):
            p = chart.sample(rng, radius)
            partials = mechanics_service.hamiltonian_partials(sys, PhaseState(t, q, p))
            solution = self.solve_multipliers(sys, t, q, p, partials=partials)
            work = abs(solution.reaction @ (xi - tau * partials.H_p))
            worst = max(worst, work / (1.0 + np.linalg.norm(solution.reaction)))
        return MembershipResult(worst <= tolerance, float(worst), count)


constraint_service = ConstraintService()
