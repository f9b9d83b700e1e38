"""
Dynamics Service - perturbed Hamiltonian vector field and RK4 integration on the
constrained manifold
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import (
    NonFiniteStateError,
    OffManifoldError,
    ProjectionDivergenceError,
    SingularMultiplierSystemError,
)
from app.models.mechanics import MechSystem
from app.models.state import MultiplierSolution, PhaseState, PhaseVectorField, Trajectory
from app.services.constraint_service import constraint_service
from app.services.mechanics_service import mechanics_service

logger = logging.getLogger(__name__)


def solve_correction(matrix: np.ndarray, rhs: np.ndarray, rows: List[str]) -> np.ndarray:
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        raise SingularMultiplierSystemError(float("inf"), rows) from None


class DynamicsService:
    """Service for the equations of motion and their integration"""

    def field_with_multipliers(self, sys: MechSystem, state: PhaseState) -> Tuple[PhaseVectorField, MultiplierSolution]:
        partials = mechanics_service.hamiltonian_partials(sys, state)
        force = mechanics_service.force(sys, state)
        solution = constraint_service.solve_multipliers(
            sys, state.t, state.q, state.p, partials=partials, force=force
        )
        field = PhaseVectorField(1.0, partials.H_p, -partials.H_q + force + solution.reaction)
        return field, solution

    def vector_field(self, sys: MechSystem, state: PhaseState) -> PhaseVectorField:
        """qdot = H_p, pdot = -H_q + F + R"""
        return self.field_with_multipliers(sys, state)[0]

    def perturbation(self, sys: MechSystem, state: PhaseState) -> PhaseVectorField:
        """P = (F + R).d/dp"""
        force = mechanics_service.force(sys, state)
        solution = constraint_service.solve_multipliers(sys, state.t, state.q, state.p, force=force)
        return PhaseVectorField(0.0, np.zeros(sys.n), force + solution.reaction)

    def _rates(self, sys: MechSystem, t: float, y: np.ndarray) -> np.ndarray:
        n = sys.n
        field = self.vector_field(sys, PhaseState(t, y[:n], y[n:]))
        return np.concatenate((field.dq, field.dp))

    def step(self, sys: MechSystem, state: PhaseState, h: float) -> PhaseState:
        """One classical Runge-Kutta step"""
        n = sys.n
        t = state.t
        y = np.concatenate((state.q, state.p))
        k1 = self._rates(sys, t, y)
        k2 = self._rates(sys, t + 0.5 * h, y + 0.5 * h * k1)
        k3 = self._rates(sys, t + 0.5 * h, y + 0.5 * h * k2)
        k4 = self._rates(sys, t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return PhaseState(t + h, y[:n], y[n:])

    def project_to_manifold(self, sys: MechSystem, state: PhaseState) -> PhaseState:
        """Newton-project q onto f = 0, then correct p by -A^T (A M^-1 A^T)^-1 g"""
        if sys.k == 0:
            return state
        t, q, p = state.t, state.q.copy(), state.p.copy()
        holonomic = [index for index, row in enumerate(sys.rows) if row.is_holonomic]
        if holonomic:
            for iteration in range(settings.NEWTON_MAX_ITER + 1):
                f = mechanics_service.holonomic_residual(sys, t, q)
                if np.max(np.abs(f)) <= settings.TOL_PROJECTION:
                    break
                if iteration == settings.NEWTON_MAX_ITER:
                    raise ProjectionDivergenceError(
                        f"position projection did not converge at t={t!r}: residual {np.max(np.abs(f)):.3e}"
                    )
                _, A = mechanics_service.constraint_matrix(sys, t, q)
                jacobian = A[holonomic]
                labels = [sys.rows[i].label for i in holonomic]
                q = q - jacobian.T @ solve_correction(jacobian @ jacobian.T, f, labels)
        for iteration in range(settings.NEWTON_MAX_ITER + 1):
            g = constraint_service.momentum_residual(sys, t, q, p)
            if np.max(np.abs(g)) <= settings.TOL_PROJECTION:
                break
            if iteration == settings.NEWTON_MAX_ITER:
                raise ProjectionDivergenceError(
                    f"momentum projection did not converge at t={t!r}: residual {np.max(np.abs(g)):.3e}"
                )
            _, A = mechanics_service.constraint_matrix(sys, t, q)
            inverse, _ = mechanics_service.inverse_mass(sys, t, q)
            p = p - A.T @ solve_correction(A @ inverse @ A.T, g, sys.row_labels)
        return PhaseState(t, q, p)

    def integrate(self, sys: MechSystem, initial: PhaseState, h: float, steps: int,
                  projection: bool = True, tolerance: Optional[float] = None) -> Trajectory:
        if h <= 0:
            raise ValueError(f"step size must be positive, got {h!r}")
        if not initial.is_finite():
            raise NonFiniteStateError(initial.t, 0)
        tolerance = settings.TOL_MANIFOLD if tolerance is None else tolerance
        start_residual = constraint_service.manifold_residual(sys, initial)
        if start_residual > tolerance:
            raise OffManifoldError(start_residual, tolerance)

        n, k = sys.n, sys.k
        times = initial.t + h * np.arange(steps + 1)
        q = np.empty((steps + 1, n))
        p = np.empty((steps + 1, n))
        lam = np.empty((steps + 1, k))
        drift = np.empty(steps + 1)
        residual = np.empty(steps + 1)

        state = initial
        _, solution = self.field_with_multipliers(sys, state)
        q[0], p[0], lam[0] = state.q, state.p, solution.lam
        drift[0] = residual[0] = start_residual
        logger.debug(f"Integrating n={n} k={k} h={h} steps={steps} projection={projection}")

        for index in range(1, steps + 1):
            advanced = self.step(sys, state, h)
            state = PhaseState(times[index], advanced.q, advanced.p)
            if not state.is_finite():
                raise NonFiniteStateError(state.t, index)
            drift[index] = constraint_service.manifold_residual(sys, state)
            if projection:
                state = self.project_to_manifold(sys, state)
                residual[index] = constraint_service.manifold_residual(sys, state)
            else:
                residual[index] = drift[index]
            _, A = mechanics_service.constraint_matrix(sys, state.t, state.q)
            mechanics_service.check_rank(sys, A)
            _, solution = self.field_with_multipliers(sys, state)
            q[index], p[index], lam[index] = state.q, state.p, solution.lam

        logger.info(
            f"Integration finished: {steps} steps to t={times[-1]:.6g}, "
            f"max drift {drift.max():.3e}, max residual {residual.max():.3e}"
        )
        return Trajectory(
            t=times,
            q=q,
            p=p,
            lam=lam,
            h=h,
            drift=drift,
            residual=residual,
            metadata={"integrator": "rk4", "projection": projection, "steps": steps},
        )


dynamics_service = DynamicsService()
