"""
Scenario description: system, symmetry candidates, integration and checks
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.core.config import settings
from app.expr import Expr
from app.models.mechanics import MechSystem
from app.models.state import PhaseState
from app.models.symmetry import OneForm, SymmetrySpec

SYMMETRY_CHECKS = (
    "momentum",
    "conservation",
    "invariance",
    "annihilator",
    "weak_noether",
    "bracket",
    "generalized",
    "lagrangian_equivalence",
    "contraction_identity",
    "noether_invariance",
    "moving_energy",
)
SYSTEM_CHECKS = ("gyroscopic", "subset", "multiplier_oracle", "order")


class ScenarioInfo(BaseModel):
    name: str
    dimension: int = Field(ge=1)
    description: str = ""
    anchor: str = ""
    expect_exit: int = Field(default=0, ge=0, le=1)


class IntegrationSettings(BaseModel):
    t0: float = 0.0
    q0: List[float]
    p0: List[float]
    h: float = Field(default=1e-3, gt=0)
    steps: int = Field(default=10000, ge=1)
    projection: bool = True
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)


class Tolerances(BaseModel):
    """Per-scenario overrides of the default tolerances"""

    identity: float = Field(default_factory=lambda: settings.TOL_IDENTITY)
    drift: float = Field(default_factory=lambda: settings.TOL_DRIFT)
    invariance: float = Field(default_factory=lambda: settings.TOL_INVARIANCE)
    equivalence: float = Field(default_factory=lambda: settings.TOL_EQUIVALENCE)
    membership: float = Field(default_factory=lambda: settings.TOL_MEMBERSHIP)
    bracket: float = Field(default_factory=lambda: settings.TOL_BRACKET)
    generalized: float = Field(default_factory=lambda: settings.TOL_GENERALIZED)
    oracle: float = Field(default_factory=lambda: settings.TOL_ORACLE)
    order: float = Field(default_factory=lambda: settings.TOL_ORDER)


@dataclass(frozen=True)
class SymmetryCase:
    spec: SymmetrySpec
    checks: Tuple[str, ...] = ()
    gamma: Optional[OneForm] = None
    xi0: Optional[Tuple[Expr, ...]] = None

    @property
    def label(self) -> str:
        return self.spec.label


@dataclass(frozen=True)
class Scenario:
    info: ScenarioInfo
    system: MechSystem
    integration: IntegrationSettings
    symmetries: Tuple[SymmetryCase, ...] = ()
    checks: Tuple[str, ...] = ()
    tolerances: Tolerances = field(default_factory=Tolerances)
    source: Optional[str] = None

    @property
    def name(self) -> str:
        return self.info.name

    @property
    def params(self) -> Dict[str, float]:
        return self.system.params

    def initial_state(self) -> PhaseState:
        return PhaseState(self.integration.t0, np.array(self.integration.q0), np.array(self.integration.p0))

    def with_overrides(self, seed: Optional[int] = None, h: Optional[float] = None,
                       steps: Optional[int] = None) -> "Scenario":
        """Copy with CLI overrides applied to the integration section"""
        update = {key: value for key, value in (("seed", seed), ("h", h), ("steps", steps)) if value is not None}
        if not update:
            return self
        integration = IntegrationSettings.model_validate({**self.integration.model_dump(), **update})
        return replace(self, integration=integration)
