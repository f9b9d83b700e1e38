from app.models.mechanics import HOLONOMIC, KINEMATIC, ConstraintRow, Force, MechSystem, NaturalLagrangian
from app.models.report import CheckEntry, Report, TrajectorySummary, Verdict
from app.models.scenario import IntegrationSettings, Scenario, ScenarioInfo, SymmetryCase, Tolerances
from app.models.state import (
    AdmissibleMomentumChart,
    HamiltonianPartials,
    LagrangianPartials,
    MembershipResult,
    MultiplierSolution,
    PhaseState,
    PhaseVectorField,
    Trajectory,
)
from app.models.symmetry import OneForm, SymmetrySpec

__all__ = [
    "HOLONOMIC",
    "KINEMATIC",
    "AdmissibleMomentumChart",
    "CheckEntry",
    "ConstraintRow",
    "Force",
    "HamiltonianPartials",
    "IntegrationSettings",
    "LagrangianPartials",
    "MechSystem",
    "MembershipResult",
    "MultiplierSolution",
    "NaturalLagrangian",
    "OneForm",
    "PhaseState",
    "PhaseVectorField",
    "Report",
    "Scenario",
    "ScenarioInfo",
    "SymmetryCase",
    "SymmetrySpec",
    "Tolerances",
    "TrajectorySummary",
    "Trajectory",
    "Verdict",
]
