"""
Numeric state types on the extended phase space R x T*Q
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional

import numpy as np


def _array(values) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class PhaseState:
    t: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", _array(self.q))
        object.__setattr__(self, "p", _array(self.p))
        if self.q.shape != self.p.shape:
            raise ValueError(f"q and p differ in length: {self.q.size} != {self.p.size}")

    @property
    def n(self) -> int:
        return self.q.size

    def as_vector(self) -> np.ndarray:
        """(t, q, p) stacked"""
        return np.concatenate(([self.t], self.q, self.p))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "PhaseState":
        n = (len(x) - 1) // 2
        return cls(x[0], x[1:n + 1], x[n + 1:])

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.t) and np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))


@dataclass(frozen=True, eq=False)
class PhaseVectorField:
    """Tangent vector dt d/dt + dq.d/dq + dp.d/dp at a phase state"""

    dt: float
    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "dq", _array(self.dq))
        object.__setattr__(self, "dp", _array(self.dp))

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.dt], self.dq, self.dp))

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "PhaseVectorField":
        n = (len(v) - 1) // 2
        return cls(v[0], v[1:n + 1], v[n + 1:])

    def __add__(self, other: "PhaseVectorField") -> "PhaseVectorField":
        return PhaseVectorField(self.dt + other.dt, self.dq + other.dq, self.dp + other.dp)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.as_vector())))


@dataclass(frozen=True, eq=False)
class HamiltonianPartials:
    """Values of H and its partials at one state

    hessian, when requested, is the full (2n+1)x(2n+1) matrix in (t, q, p).
    velocity is H_p = M^-1 (p - b); velocity_z holds its partials over
    z = (t, q), one row per z-variable.
    """

    H: float
    H_t: float
    H_q: np.ndarray
    H_p: np.ndarray
    H_pp: np.ndarray
    velocity_z: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None

    @property
    def velocity(self) -> np.ndarray:
        return self.H_p

    @property
    def gradient(self) -> np.ndarray:
        """dH in (t, q, p)"""
        return np.concatenate(([self.H_t], self.H_q, self.H_p))


@dataclass(frozen=True, eq=False)
class LagrangianPartials:
    L: float
    L_t: float
    L_q: np.ndarray
    L_qdot: np.ndarray


@dataclass(frozen=True, eq=False)
class MultiplierSolution:
    lam: np.ndarray
    reaction: np.ndarray
    conditioning: float = 1.0
    # d/dt g after the solve, one entry per row
    constraint_rate: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def empty(cls, n: int) -> "MultiplierSolution":
        return cls(np.zeros(0), np.zeros(n), 1.0, np.zeros(0))


@dataclass(frozen=True, eq=False)
class AdmissibleMomentumChart:
    """p = p_star + basis.c parameterizes the admissible momenta at (t, q)"""

    p_star: np.ndarray
    basis: np.ndarray

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def momentum(self, c) -> np.ndarray:
        return self.p_star + self.basis @ np.asarray(c, dtype=float)

    def sample(self, rng: np.random.Generator, radius: float) -> np.ndarray:
        return self.momentum(radius * rng.standard_normal(self.dimension))


@dataclass(frozen=True)
class MembershipResult:
    passed: bool
    residual: float
    samples: int = 1


@dataclass(eq=False)
class Trajectory:
    """Uniform-step samples of a motion with per-sample multipliers

    drift holds the constraint residual measured after each step and before
    projection; residual holds it after projection.
    """

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    h: float
    drift: np.ndarray
    residual: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.size

    def state(self, index: int) -> PhaseState:
        return PhaseState(self.t[index], self.q[index], self.p[index])

    def states(self) -> Iterator[PhaseState]:
        for index in range(len(self)):
            yield self.state(index)

    @property
    def final(self) -> PhaseState:
        return self.state(len(self) - 1)

    def sample_indices(self, count: int) -> np.ndarray:
        """Up to count evenly spread indices including both ends"""
        if count >= len(self):
            return np.arange(len(self))
        return np.unique(np.linspace(0, len(self) - 1, count).round().astype(int))
