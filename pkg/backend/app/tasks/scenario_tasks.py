"""
Scenario tasks: integrate a scenario, run its checks and write the outputs

Runs are independent; `run_scenarios` fans them out over worker processes
and every run writes only into its own output directory.
"""
import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.config import settings
from app.core.exceptions import NoetherBenchError
from app.models.report import CheckEntry, Report
from app.models.scenario import Scenario, SymmetryCase
from app.models.state import Trajectory
from app.services.dynamics_service import dynamics_service
from app.services.report_service import report_service
from app.services.scenario_service import scenario_service
from app.services.symmetry_service import symmetry_service
from app.services.verification_service import verification_service

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


class RunOutcome(BaseModel):
    target: str
    scenario: Optional[str] = None
    status: int
    expected: Optional[int] = None
    message: str = ""
    output: Optional[str] = None


def symmetry_checks(scenario: Scenario, case: SymmetryCase, traj: Trajectory, series: np.ndarray) -> List[CheckEntry]:
    """Entries for every check requested by one symmetry section"""
    sys, spec, tol = scenario.system, case.spec, scenario.tolerances
    seed = scenario.integration.seed
    entries: List[CheckEntry] = []
    reduced: Optional[CheckEntry] = None
    annihilator: Optional[CheckEntry] = None
    for check in case.checks:
        rng = np.random.default_rng(seed)
        if check == "momentum":
            full, reduced = verification_service.momentum_equation_report(sys, spec, traj, tol.identity)
            entries.extend((full, reduced))
        elif check == "conservation":
            entries.append(verification_service.conservation_report(sys, spec, traj, series, tol.drift))
        elif check == "invariance":
            entries.append(verification_service.invariance_report(sys, spec, traj, rng, tolerance=tol.invariance))
        elif check == "annihilator":
            annihilator = verification_service.annihilator_report(sys, spec, traj, rng, tolerance=tol.membership)
            entries.append(annihilator)
        elif check == "weak_noether":
            entries.append(verification_service.weak_noether_report(sys, spec, traj, tol.equivalence))
        elif check == "bracket":
            entries.append(verification_service.bracket_report(sys, spec, traj, tol.bracket))
        elif check == "generalized":
            entries.append(verification_service.generalized_symmetry_report(sys, spec, case.gamma, traj, tol.generalized))
        elif check == "lagrangian_equivalence":
            entries.append(verification_service.lagrangian_equivalence_report(
                sys, spec, traj, rng, tolerance=tol.equivalence
            ))
        elif check == "contraction_identity":
            entries.append(verification_service.contraction_identity_report(sys, spec, traj, tol.equivalence))
        elif check == "noether_invariance":
            entries.append(verification_service.noether_invariance_report(sys, spec, traj, tol.equivalence))
        elif check == "moving_energy":
            entries.append(verification_service.moving_energy_report(
                sys, spec, case.xi0, traj, series, rng, tolerance=tol.drift
            ))
    if reduced is not None and annihilator is not None:
        entries.append(verification_service.membership_agreement(spec, reduced, annihilator))
    return entries


def system_checks(scenario: Scenario, traj: Trajectory) -> List[CheckEntry]:
    sys, tol = scenario.system, scenario.tolerances
    entries = []
    for check in scenario.checks:
        rng = np.random.default_rng(scenario.integration.seed)
        if check == "gyroscopic":
            entries.append(verification_service.gyroscopic_check(sys, traj=traj, rng=rng, tolerance=tol.identity))
        elif check == "subset":
            entries.append(verification_service.subset_check(sys, traj=traj, rng=rng, tolerance=tol.membership))
        elif check == "multiplier_oracle":
            entries.append(verification_service.multiplier_oracle_report(sys, traj, rng, tolerance=tol.oracle))
        elif check == "order":
            entries.append(verification_service.order_report(sys, scenario.initial_state(), tolerance=tol.order))
    return entries


def evaluate_scenario(scenario: Scenario) -> Tuple[Trajectory, Dict[str, np.ndarray], Report]:
    """Integrate the scenario and assemble its report"""
    integration = scenario.integration
    traj = dynamics_service.integrate(
        scenario.system, scenario.initial_state(), integration.h, integration.steps, integration.projection
    )
    series: Dict[str, np.ndarray] = {}
    report = Report(
        scenario=scenario.name,
        description=scenario.info.description,
        anchor=scenario.info.anchor,
        dimension=scenario.system.n,
        constraints=scenario.system.k,
        seed=integration.seed,
        h=integration.h,
        steps=integration.steps,
        projection=integration.projection,
        expected_exit=scenario.info.expect_exit,
        generator=f"{settings.PROJECT_NAME} {settings.VERSION}",
    )
    for case in scenario.symmetries:
        series[case.label] = symmetry_service.noether_series(case.spec, scenario.system, traj)
        report.trajectories.append(
            verification_service.trajectory_summary(scenario.system, case.spec, traj, series[case.label])
        )
        report.checks.extend(symmetry_checks(scenario, case, traj, series[case.label]))
    report.checks.extend(system_checks(scenario, traj))
    for entry in report.failures:
        logger.warning(f"{scenario.name}: {entry.name} failed (residual {entry.max_residual:.3e} > {entry.tolerance:.1e})")
    return traj, series, report


def run_scenario(target: str, out_dir: Path, seed: Optional[int] = None, h: Optional[float] = None,
                 steps: Optional[int] = None) -> RunOutcome:
    """Run one scenario end to end; errors become exit status 2"""
    try:
        scenario = scenario_service.load_scenario(target).with_overrides(seed=seed, h=h, steps=steps)
        traj, series, report = evaluate_scenario(scenario)
        output = report_service.write_run(Path(out_dir), scenario, traj, series, report)
    except NoetherBenchError as exc:
        logger.error(f"{target}: {exc}")
        return RunOutcome(target=str(target), status=EXIT_ERROR, message=str(exc))
    failed = ", ".join(entry.name for entry in report.failures)
    return RunOutcome(
        target=str(target),
        scenario=scenario.name,
        status=report.exit_status,
        expected=scenario.info.expect_exit,
        message=f"failed: {failed}" if failed else "all checks passed",
        output=str(output),
    )


async def run_scenarios(targets: Sequence[str], out_dir: Path, jobs: int = 1, **overrides) -> List[RunOutcome]:
    """Run several scenarios, concurrently when jobs > 1"""
    if jobs <= 1 or len(targets) <= 1:
        return [run_scenario(target, out_dir, **overrides) for target in targets]
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [loop.run_in_executor(pool, partial(run_scenario, target, out_dir, **overrides)) for target in targets]
        return list(await asyncio.gather(*futures))


def combined_status(outcomes: Sequence[RunOutcome]) -> int:
    """2 if any run errored, else 1 if any check failed, else 0"""
    statuses = [outcome.status for outcome in outcomes]
    if EXIT_ERROR in statuses:
        return EXIT_ERROR
    return EXIT_FAIL if EXIT_FAIL in statuses else EXIT_PASS
