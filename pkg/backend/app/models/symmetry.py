"""
Symmetry candidates and 1-forms on R x T*Q
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from typing import List, Optional, Tuple

from app.expr import ONE, ZERO, CompiledExprs, Expr, compile_exprs, diff
from app.models.mechanics import phase_names, time_configuration_names


@dataclass(frozen=True)
class OneForm:
    """dt dt + sum dq_i dq_i + sum dp_i dp_i with components in (t, q, p)"""

    dt: Expr
    dq: Tuple[Expr, ...]
    dp: Tuple[Expr, ...]

    def __post_init__(self):
        if len(self.dq) != len(self.dp):
            raise ValueError("dq and dp parts of a 1-form must have the same length")

    @classmethod
    def zero(cls, n: int) -> "OneForm":
        return cls(ZERO, (ZERO,) * n, (ZERO,) * n)

    @property
    def n(self) -> int:
        return len(self.dq)

    @property
    def components(self) -> List[Expr]:
        return [self.dt] + list(self.dq) + list(self.dp)

    @property
    def is_zero(self) -> bool:
        return all(c == ZERO for c in self.components)

    @cached_property
    def kernel(self) -> CompiledExprs:
        return compile_exprs(self.components)

    @cached_property
    def jacobian_kernel(self) -> CompiledExprs:
        """Row-major d(component)/d(x) over x = (t, q, p)"""
        names = phase_names(self.n)
        return compile_exprs([diff(c, var) for c in self.components for var in names])


@dataclass(frozen=True)
class SymmetrySpec:
    """Candidate field tau d/dt + xi.d/dq with gauge f and closed 1-form beta"""

    label: str
    tau: Expr
    xi: Tuple[Expr, ...]
    gauge: Expr = ZERO
    beta: Optional[OneForm] = None

    def __post_init__(self):
        if self.beta is not None and self.beta.n != self.n:
            raise ValueError(f"beta has dimension {self.beta.n}, field has {self.n}")

    @classmethod
    def time_translation(cls, n: int, label: str = "energy") -> "SymmetrySpec":
        return cls(label=label, tau=ONE, xi=(ZERO,) * n)

    @property
    def n(self) -> int:
        return len(self.xi)

    @property
    def base(self) -> List[Expr]:
        """(tau, xi_1..xi_n)"""
        return [self.tau] + list(self.xi)

    @property
    def has_beta(self) -> bool:
        return self.beta is not None and not self.beta.is_zero

    @cached_property
    def base_kernel(self) -> CompiledExprs:
        return compile_exprs(self.base)

    @cached_property
    def base_jacobian_kernel(self) -> CompiledExprs:
        """Row-major d(tau, xi)/dz over z = (t, q)"""
        names = time_configuration_names(self.n)
        return compile_exprs([diff(c, var) for c in self.base for var in names])

    @cached_property
    def base_hessian_kernel(self) -> CompiledExprs:
        """For each component, second partials over pairs a <= c of z"""
        names = time_configuration_names(self.n)
        pairs = list(combinations_with_replacement(names, 2))
        return compile_exprs([diff(diff(c, a), b) for c in self.base for a, b in pairs])

    @cached_property
    def gauge_kernel(self) -> CompiledExprs:
        """f then df over (t, q, p)"""
        names = phase_names(self.n)
        return compile_exprs([self.gauge] + [diff(self.gauge, var) for var in names])
