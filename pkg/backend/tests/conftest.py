"""
Shared fixtures: small hand-built systems and short builtin runs
"""
from typing import Dict, Optional, Sequence

import numpy as np
import pytest

from app.expr import parse
from app.models.mechanics import KINEMATIC, ConstraintRow, Force, MechSystem, NaturalLagrangian
from app.models.state import PhaseState
from app.models.symmetry import SymmetrySpec
from app.services.dynamics_service import dynamics_service
from app.services.mechanics_service import mechanics_service
from app.services.scenario_service import scenario_service


def build_system(n: int, mass: Dict[str, str], b: Optional[Dict[int, str]] = None, V: str = "0",
                 force: Optional[Sequence[str]] = None, holonomic: Sequence[str] = (),
                 kinematic: Sequence[Dict[str, str]] = (), params: Optional[Dict[str, float]] = None) -> MechSystem:
    """Build a system from formula strings; mass keys are "ij" with one-based i <= j"""
    entries = {(int(key[0]) - 1, int(key[1]) - 1): parse(value) for key, value in mass.items()}
    lagrangian = NaturalLagrangian.from_entries(
        n, entries, {i - 1: parse(value) for i, value in (b or {}).items()}, parse(V)
    )
    forces = Force(tuple(parse(c) for c in force)) if force else Force.zero(n)
    rows = [mechanics_service.holonomic_row(f"f{index + 1}", parse(f), n) for index, f in enumerate(holonomic)]
    for index, row in enumerate(kinematic):
        rows.append(ConstraintRow(
            label=f"g{index + 1}",
            kind=KINEMATIC,
            a0=parse(row.get("a0", "0")),
            a=tuple(parse(row.get(f"a{i + 1}", "0")) for i in range(n)),
        ))
    return MechSystem(lagrangian=lagrangian, force=forces, rows=tuple(rows), params=dict(params or {}))


def symmetry(label: str, tau: str = "0", xi: Sequence[str] = (), gauge: str = "0") -> SymmetrySpec:
    return SymmetrySpec(label=label, tau=parse(tau), xi=tuple(parse(c) for c in xi), gauge=parse(gauge))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def circle_system():
    return build_system(2, {"11": "m", "22": "m"}, holonomic=["q1^2 + q2^2 - 1"], params={"m": 2.0})


@pytest.fixture(scope="session")
def slider_system():
    return build_system(2, {"11": "1", "22": "1"}, holonomic=["q1 - t"])


@pytest.fixture(scope="session")
def coupled_system():
    """Unconstrained 2-dof system with position and time dependent mass and a gauge term"""
    return build_system(
        2,
        {"11": "2 + cos(q2)", "12": "0.3", "22": "1 + t^2"},
        b={1: "sin(q1)", 2: "t*q2"},
        V="q1^2*q2",
    )


@pytest.fixture(scope="session")
def example1():
    return scenario_service.load_scenario("example1-momentum")


@pytest.fixture(scope="session")
def example1_traj(example1):
    integration = example1.integration
    return dynamics_service.integrate(example1.system, example1.initial_state(), integration.h, 300)


@pytest.fixture(scope="session")
def circle_traj(circle_system):
    initial = PhaseState(0.0, [1.0, 0.0], [0.0, 2.0])
    return dynamics_service.integrate(circle_system, initial, 1e-3, 400)


@pytest.fixture(scope="session")
def unit_free_particle():
    return build_system(3, {"11": "1", "22": "1", "33": "1"})

