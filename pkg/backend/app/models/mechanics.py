"""
Mechanical system description: natural Lagrangian, forces and constraint rows

The symbolic data is immutable. Everything the numeric services need (entries
of M, b, V, their first and second partials in (t, q), force components,
constraint coefficients and their partials) is compiled into kernels on first
use and cached on the instance.
"""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Tuple

from app.expr import ZERO, CompiledExprs, Expr, compile_exprs, diff

HOLONOMIC = "holonomic"
KINEMATIC = "kinematic"


def time_configuration_names(n: int) -> List[str]:
    """Names of z = (t, q1..qn)"""
    return ["t"] + [f"q{i + 1}" for i in range(n)]


def phase_names(n: int) -> List[str]:
    """Names of x = (t, q1..qn, p1..pn)"""
    return time_configuration_names(n) + [f"p{i + 1}" for i in range(n)]


def upper_pairs(n: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


@dataclass(frozen=True)
class NaturalLagrangian:
    """L = 1/2 qdot.M.qdot + b.qdot - V with M stored as its upper triangle"""

    n: int
    mass: Tuple[Expr, ...]
    b: Tuple[Expr, ...]
    V: Expr = ZERO

    def __post_init__(self):
        if len(self.mass) != len(upper_pairs(self.n)):
            raise ValueError(f"mass matrix needs {len(upper_pairs(self.n))} upper-triangle entries")
        if len(self.b) != self.n:
            raise ValueError(f"b needs {self.n} components, got {len(self.b)}")

    @classmethod
    def from_entries(cls, n: int, entries: Dict[Tuple[int, int], Expr],
                     b: Optional[Dict[int, Expr]] = None, V: Expr = ZERO) -> "NaturalLagrangian":
        """Build from zero-based (i, j) upper-triangle entries; missing entries are 0"""
        mass = tuple(entries.get(pair, ZERO) for pair in upper_pairs(n))
        linear = tuple((b or {}).get(i, ZERO) for i in range(n))
        return cls(n=n, mass=mass, b=linear, V=V)

    def entry(self, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        return self.mass[upper_pairs(self.n).index((i, j))]

    def matrix(self) -> List[List[Expr]]:
        return [[self.entry(i, j) for j in range(self.n)] for i in range(self.n)]


@dataclass(frozen=True)
class Force:
    components: Tuple[Expr, ...]

    @classmethod
    def zero(cls, n: int) -> "Force":
        return cls(tuple(ZERO for _ in range(n)))

    @property
    def is_zero(self) -> bool:
        return all(c == ZERO for c in self.components)


@dataclass(frozen=True)
class ConstraintRow:
    """One row a0 + a.qdot = 0; holonomic rows also keep their position-level f"""

    label: str
    kind: str
    a0: Expr
    a: Tuple[Expr, ...]
    f: Optional[Expr] = None

    def __post_init__(self):
        if self.kind not in (HOLONOMIC, KINEMATIC):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == HOLONOMIC and self.f is None:
            raise ValueError("holonomic rows need their position-level function")

    @property
    def is_holonomic(self) -> bool:
        return self.kind == HOLONOMIC


@dataclass(frozen=True)
class MechSystem:
    lagrangian: NaturalLagrangian
    force: Force
    rows: Tuple[ConstraintRow, ...] = ()
    params: Dict[str, float] = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        if len(self.force.components) != self.n:
            raise ValueError(f"force needs {self.n} components, got {len(self.force.components)}")
        for row in self.rows:
            if len(row.a) != self.n:
                raise ValueError(f"constraint {row.label!r} needs {self.n} coefficients")
        kinds = [row.is_holonomic for row in self.rows]
        if kinds != sorted(kinds, reverse=True):
            raise ValueError("holonomic rows must precede kinematic rows")

    @property
    def n(self) -> int:
        return self.lagrangian.n

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def holonomic_rows(self) -> Tuple[ConstraintRow, ...]:
        return tuple(row for row in self.rows if row.is_holonomic)

    @property
    def row_labels(self) -> List[str]:
        return [row.label for row in self.rows]

    @property
    def z_names(self) -> List[str]:
        return time_configuration_names(self.n)

    @property
    def x_names(self) -> List[str]:
        return phase_names(self.n)

    # kernels

    def _lagrangian_data(self) -> List[Expr]:
        return list(self.lagrangian.mass) + list(self.lagrangian.b) + [self.lagrangian.V]

    @cached_property
    def lagrangian_kernel(self) -> CompiledExprs:
        """upper(M), b, V"""
        return compile_exprs(self._lagrangian_data())

    @cached_property
    def lagrangian_gradient_kernel(self) -> CompiledExprs:
        """For each z-variable in order: upper(M_z), b_z, V_z"""
        data = self._lagrangian_data()
        return compile_exprs([diff(e, var) for var in self.z_names for e in data])

    @cached_property
    def lagrangian_hessian_kernel(self) -> CompiledExprs:
        """For each pair a <= c of z-variables: upper(M_zz), b_zz, V_zz"""
        data = self._lagrangian_data()
        exprs = []
        for first, second in combinations_with_replacement(self.z_names, 2):
            exprs.extend(diff(diff(e, first), second) for e in data)
        return compile_exprs(exprs)

    @cached_property
    def force_kernel(self) -> CompiledExprs:
        return compile_exprs(self.force.components)

    @cached_property
    def rows_kernel(self) -> CompiledExprs:
        """a0 then a for every row"""
        exprs = []
        for row in self.rows:
            exprs.append(row.a0)
            exprs.extend(row.a)
        return compile_exprs(exprs)

    @cached_property
    def rows_gradient_kernel(self) -> CompiledExprs:
        """For each z-variable: a0_z then a_z for every row"""
        exprs = []
        for var in self.z_names:
            for row in self.rows:
                exprs.append(diff(row.a0, var))
                exprs.extend(diff(c, var) for c in row.a)
        return compile_exprs(exprs)

    @cached_property
    def holonomic_kernel(self) -> CompiledExprs:
        return compile_exprs([row.f for row in self.holonomic_rows])
