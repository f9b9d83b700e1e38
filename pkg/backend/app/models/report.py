"""
Verification report schema
"""
import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class CheckEntry(BaseModel):
    name: str
    anchor: str
    symmetry: Optional[str] = None
    verdict: Verdict
    max_residual: float
    tolerance: float
    samples: int
    details: Dict[str, float] = Field(default_factory=dict)

    @classmethod
    def judge(cls, name: str, anchor: str, residual: float, tolerance: float, samples: int,
              symmetry: Optional[str] = None, passed: Optional[bool] = None, **details: float) -> "CheckEntry":
        """Verdict is pass iff residual <= tolerance unless passed is given explicitly"""
        residual = float(residual)
        if passed is None:
            passed = math.isfinite(residual) and residual <= tolerance
        return cls(
            name=name,
            anchor=anchor,
            symmetry=symmetry,
            verdict=Verdict.PASS if passed else Verdict.FAIL,
            max_residual=residual,
            tolerance=tolerance,
            samples=samples,
            details={key: float(value) for key, value in details.items()},
        )

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS


class TrajectorySummary(BaseModel):
    symmetry: str
    initial_value: float
    final_value: float
    max_abs_drift: float
    relative_drift: float
    constraint_drift: float
    manifold_residual: float
    energy_drift: float
    min_contact: Optional[float] = None


class Report(BaseModel):
    scenario: str
    description: str = ""
    anchor: str = ""
    dimension: int
    constraints: int
    seed: int
    h: float
    steps: int
    projection: bool
    expected_exit: int = 0
    checks: List[CheckEntry] = Field(default_factory=list)
    trajectories: List[TrajectorySummary] = Field(default_factory=list)
    generator: str = ""

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.checks)

    @property
    def exit_status(self) -> int:
        return 0 if self.passed else 1

    @property
    def failures(self) -> List[CheckEntry]:
        return [entry for entry in self.checks if not entry.passed]
