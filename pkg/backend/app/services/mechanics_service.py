"""
Mechanics Service - Legendre transformation and Hamiltonian partials

H is never differentiated as a tree for numerics. With v = M^-1 (p - b):

    H     = 1/2 (p - b).v + V
    H_p   = v,  H_pp = M^-1
    H_z   = -b_z.v - 1/2 v.M_z.v + V_z            z = (t, q)
    v_z   = M^-1 (-b_z - M_z v)
    H_zz  = -b_zz.v - b_z.v_z' - v.M_z.v_z' - 1/2 v.M_zz.v + V_zz

The symbolic H is still available for small n and must agree with these.
"""
import logging
from itertools import combinations_with_replacement
from typing import List, Tuple

import numpy as np
from scipy import linalg

from app.core.config import settings
from app.core.exceptions import MechanicsError, NotPositiveDefiniteError, RankDeficiencyError
from app.expr import ONE, ZERO, Constant, Expr, Variable, diff, free_variables
from app.expr.calculus import add, div, mul, neg, sub
from app.models.mechanics import HOLONOMIC, ConstraintRow, MechSystem, NaturalLagrangian
from app.models.state import HamiltonianPartials, LagrangianPartials, PhaseState

logger = logging.getLogger(__name__)

SYMBOLIC_HAMILTONIAN_MAX_DIMENSION = 4


def _split_lagrangian_data(values, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unpack stacked (upper(M), b, V) blocks; leading axes are kept"""
    values = np.asarray(values, dtype=float)
    m = n * (n + 1) // 2
    lead = values.shape[:-1]
    upper = values[..., :m]
    M = np.empty(lead + (n, n))
    rows, cols = np.triu_indices(n)
    M[..., rows, cols] = upper
    M[..., cols, rows] = upper
    return M, values[..., m:m + n], values[..., m + n]


def _determinant(matrix: List[List[Expr]]) -> Expr:
    size = len(matrix)
    if size == 1:
        return matrix[0][0]
    total = ZERO
    for column in range(size):
        minor = [row[:column] + row[column + 1:] for row in matrix[1:]]
        term = mul(matrix[0][column], _determinant(minor))
        total = add(total, term) if column % 2 == 0 else sub(total, term)
    return total


def _cofactor(matrix: List[List[Expr]], i: int, j: int) -> Expr:
    minor = [row[:j] + row[j + 1:] for index, row in enumerate(matrix) if index != i]
    value = _determinant(minor) if minor else ONE
    return value if (i + j) % 2 == 0 else neg(value)


class MechanicsService:
    """Service for the Lagrangian and Hamiltonian sides of a natural system"""

    # constraint rows

    def holonomic_to_velocity_row(self, f: Expr, n: int) -> Tuple[Expr, Tuple[Expr, ...]]:
        """a0 = df/dt, a_i = df/dq_i"""
        if any(name.startswith("p") and name[1:].isdigit() for name in free_variables(f)):
            raise MechanicsError("holonomic constraint functions may depend only on (t, q)")
        return diff(f, "t"), tuple(diff(f, f"q{i + 1}") for i in range(n))

    def holonomic_row(self, label: str, f: Expr, n: int) -> ConstraintRow:
        a0, a = self.holonomic_to_velocity_row(f, n)
        return ConstraintRow(label=label, kind=HOLONOMIC, a0=a0, a=a, f=f)

    def constraint_matrix(self, sys: MechSystem, t: float, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(a0, A) at (t, q)"""
        if sys.k == 0:
            return np.zeros(0), np.zeros((0, sys.n))
        values = np.array(sys.rows_kernel(t, q, (), sys.params)).reshape(sys.k, sys.n + 1)
        return values[:, 0], values[:, 1:]

    def constraint_matrix_gradient(self, sys: MechSystem, t: float, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(a0_z, A_z) with the z index first: shapes (n+1, k) and (n+1, k, n)"""
        n, k = sys.n, sys.k
        if k == 0:
            return np.zeros((n + 1, 0)), np.zeros((n + 1, 0, n))
        values = np.array(sys.rows_gradient_kernel(t, q, (), sys.params)).reshape(n + 1, k, n + 1)
        return values[:, :, 0], values[:, :, 1:]

    def check_rank(self, sys: MechSystem, A: np.ndarray):
        """Full row rank with smallest singular value above RANK_RATIO * largest"""
        if sys.k == 0:
            return
        singular = np.linalg.svd(A, compute_uv=False)
        largest = singular[0] if singular.size else 0.0
        threshold = settings.RANK_RATIO * largest
        rank = int(np.sum(singular > threshold)) if largest > 0 else 0
        if rank < sys.k:
            raise RankDeficiencyError(rank, sys.k, sys.row_labels)

    def holonomic_residual(self, sys: MechSystem, t: float, q: np.ndarray) -> np.ndarray:
        if not sys.holonomic_rows:
            return np.zeros(0)
        return np.array(sys.holonomic_kernel(t, q, (), sys.params))

    # Lagrangian side

    def lagrangian_data(self, sys: MechSystem, t: float, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        """M, b, V evaluated at (t, q)"""
        return _split_lagrangian_data(sys.lagrangian_kernel(t, q, (), sys.params), sys.n)

    def factor_mass(self, M: np.ndarray, t: float):
        if not np.all(np.isfinite(M)):
            raise NotPositiveDefiniteError(f"mass matrix is not finite at t={t!r}")
        try:
            return linalg.cho_factor(M, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"mass matrix is not positive definite at t={t!r}") from exc

    def legendre(self, sys: MechSystem, t: float, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
        """p = M qdot + b"""
        M, b, _ = self.lagrangian_data(sys, t, q)
        return M @ np.asarray(qdot, dtype=float) + b

    def lagrangian_partials(self, sys: MechSystem, t: float, q: np.ndarray, qdot: np.ndarray) -> LagrangianPartials:
        qdot = np.asarray(qdot, dtype=float)
        M, b, V = self.lagrangian_data(sys, t, q)
        Mz, bz, Vz = _split_lagrangian_data(
            np.reshape(sys.lagrangian_gradient_kernel(t, q, (), sys.params), (sys.n + 1, -1)), sys.n
        )
        L = 0.5 * qdot @ M @ qdot + b @ qdot - V
        Lz = 0.5 * np.einsum("aij,i,j->a", Mz, qdot, qdot) + bz @ qdot - Vz
        return LagrangianPartials(L=float(L), L_t=float(Lz[0]), L_q=Lz[1:], L_qdot=M @ qdot + b)

    def force(self, sys: MechSystem, state: PhaseState) -> np.ndarray:
        if sys.force.is_zero:
            return np.zeros(sys.n)
        return np.array(sys.force_kernel(state.t, state.q, state.p, sys.params))

    def inverse_mass(self, sys: MechSystem, t: float, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(M^-1, b) at (t, q)"""
        M, b, _ = self.lagrangian_data(sys, t, q)
        factor = self.factor_mass(M, t)
        inverse = linalg.cho_solve(factor, np.eye(sys.n), check_finite=False)
        return 0.5 * (inverse + inverse.T), b

    # Hamiltonian side

    def legendre_to_hamiltonian(self, lag: NaturalLagrangian) -> Expr:
        """Symbolic H = 1/2 (p - b).adj(M).(p - b) / det(M) + V for n <= 4"""
        n = lag.n
        if n > SYMBOLIC_HAMILTONIAN_MAX_DIMENSION:
            raise MechanicsError(
                f"symbolic Hamiltonian is only built for n <= {SYMBOLIC_HAMILTONIAN_MAX_DIMENSION}; "
                "use hamiltonian_partials"
            )
        matrix = lag.matrix()
        determinant = _determinant(matrix)
        shifted = [sub(Variable(f"p{i + 1}"), lag.b[i]) for i in range(n)]
        quadratic = ZERO
        for i in range(n):
            for j in range(n):
                # adj(M)[i][j] is the (j, i) cofactor
                quadratic = add(quadratic, mul(mul(shifted[i], _cofactor(matrix, j, i)), shifted[j]))
        return add(div(mul(Constant(0.5), quadratic), determinant), lag.V)

    def hamiltonian_partials(self, sys: MechSystem, state: PhaseState, second_order: bool = False) -> HamiltonianPartials:
        n = sys.n
        t, q, p = state.t, state.q, state.p
        M, b, V = self.lagrangian_data(sys, t, q)
        factor = self.factor_mass(M, t)
        shifted = p - b
        v = linalg.cho_solve(factor, shifted, check_finite=False)
        inverse = linalg.cho_solve(factor, np.eye(n), check_finite=False)
        inverse = 0.5 * (inverse + inverse.T)
        Mz, bz, Vz = _split_lagrangian_data(
            np.reshape(sys.lagrangian_gradient_kernel(t, q, (), sys.params), (n + 1, -1)), n
        )
        Mz_v = np.einsum("aij,j->ai", Mz, v)
        Hz = -bz @ v - 0.5 * Mz_v @ v + Vz
        # v_z[a] = M^-1 (-b_z[a] - M_z[a] v)
        vz = -(bz + Mz_v) @ inverse
        hessian = None
        if second_order:
            hessian = self._hessian(sys, state, v, vz, inverse, Mz_v, bz)
        return HamiltonianPartials(
            H=float(0.5 * shifted @ v + V),
            H_t=float(Hz[0]),
            H_q=Hz[1:],
            H_p=v,
            H_pp=inverse,
            velocity_z=vz,
            hessian=hessian,
        )

    def _hessian(self, sys: MechSystem, state: PhaseState, v: np.ndarray, vz: np.ndarray,
                 inverse: np.ndarray, Mz_v: np.ndarray, bz: np.ndarray) -> np.ndarray:
        n = sys.n
        size = 2 * n + 1
        values = np.reshape(sys.lagrangian_hessian_kernel(state.t, state.q, (), sys.params), (-1, n * (n + 1) // 2 + n + 1))
        Mzz, bzz, Vzz = _split_lagrangian_data(values, n)
        hessian = np.zeros((size, size))
        pairs = combinations_with_replacement(range(n + 1), 2)
        for index, (a, c) in enumerate(pairs):
            value = (
                -bzz[index] @ v
                - bz[a] @ vz[c]
                - Mz_v[a] @ vz[c]
                - 0.5 * v @ Mzz[index] @ v
                + Vzz[index]
            )
            hessian[a, c] = hessian[c, a] = value
        hessian[: n + 1, n + 1:] = vz
        hessian[n + 1:, : n + 1] = vz.T
        hessian[n + 1:, n + 1:] = inverse
        return hessian


mechanics_service = MechanicsService()
