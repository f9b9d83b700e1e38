"""
Report Service - trajectory CSV, text report and JSON report for a run
"""
import logging
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.models.report import Report
from app.models.scenario import Scenario
from app.models.state import Trajectory

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
TRAJECTORY_FILE = "trajectory.csv"
TEXT_REPORT_FILE = "report.txt"
JSON_REPORT_FILE = "report.json"


class ReportService:
    """Service for writing run outputs"""

    def __init__(self):
        self.environment = Environment(
            loader=FileSystemLoader(str(TEMPLATE_DIR)),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )

    def trajectory_frame(self, scenario: Scenario, traj: Trajectory, series: Dict[str, np.ndarray]) -> pd.DataFrame:
        """Columns t, q1..qn, p1..pn, lambda1..lambdak, <label>_J..., constraint_drift"""
        n, k = scenario.system.n, scenario.system.k
        columns = {"t": traj.t}
        columns.update({f"q{i + 1}": traj.q[:, i] for i in range(n)})
        columns.update({f"p{i + 1}": traj.p[:, i] for i in range(n)})
        columns.update({f"lambda{i + 1}": traj.lam[:, i] for i in range(k)})
        columns.update({f"{case.label}_J": series[case.label] for case in scenario.symmetries})
        columns["constraint_drift"] = traj.drift
        return pd.DataFrame(columns)

    def write_csv(self, frame: pd.DataFrame, path: Path):
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def render_text(self, report: Report) -> str:
        return self.environment.get_template("report.txt.j2").render(report=report)

    def write_run(self, out_dir: Path, scenario: Scenario, traj: Trajectory, series: Dict[str, np.ndarray],
                  report: Report) -> Path:
        """Write the three run files into <out_dir>/<scenario name>/"""
        target = Path(out_dir) / scenario.name
        target.mkdir(parents=True, exist_ok=True)
        self.write_csv(self.trajectory_frame(scenario, traj, series), target / TRAJECTORY_FILE)
        (target / TEXT_REPORT_FILE).write_text(self.render_text(report), encoding="utf-8")
        (target / JSON_REPORT_FILE).write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info(f"Report written to {target}")
        return target


report_service = ReportService()
