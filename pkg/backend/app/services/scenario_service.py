"""
Scenario Service - reading, validating and listing scenario files

A scenario file is line oriented:

    # comment
    [section] or [section.label]
    key = value

Values are expressions except in [scenario], in `kind`/`checks`/`system` keys
and in the boolean `projection` key. Parameters may refer to earlier
parameters; definitions may refer to parameters, coordinates and earlier
definitions and are expanded into every later expression.
"""
import logging
import re
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ExpressionError, ExpressionSyntaxError, NoetherBenchError, ScenarioError
from app.expr import ZERO, Bindings, Expr, evaluate, free_variables, is_coordinate, parse, substitute
from app.models.mechanics import KINEMATIC, ConstraintRow, Force, MechSystem, NaturalLagrangian
from app.models.scenario import (
    SYMMETRY_CHECKS,
    SYSTEM_CHECKS,
    IntegrationSettings,
    Scenario,
    ScenarioInfo,
    SymmetryCase,
    Tolerances,
)
from app.models.symmetry import OneForm, SymmetrySpec
from app.services.constraint_service import constraint_service
from app.services.dynamics_service import dynamics_service
from app.services.mechanics_service import mechanics_service
from app.services.symmetry_service import symmetry_service

logger = logging.getLogger(__name__)

BUILTIN_DIR = Path(__file__).resolve().parent.parent / "scenarios"
SCENARIO_SUFFIX = ".scn"

_SECTION = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_]*)(?:\.([A-Za-z0-9_\-]+))?\]$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SECTIONS = (
    "scenario", "parameters", "definitions", "lagrangian", "forces", "constraint", "symmetry",
    "integration", "checks", "tolerances",
)
_LABELLED = ("constraint", "symmetry")
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


class _Entry:
    __slots__ = ("key", "value", "line")

    def __init__(self, key: str, value: str, line: int):
        self.key = key
        self.value = value
        self.line = line


class _Section:
    def __init__(self, kind: str, label: Optional[str], line: int):
        self.kind = kind
        self.label = label
        self.line = line
        self.entries: Dict[str, _Entry] = {}

    @property
    def title(self) -> str:
        return f"{self.kind}.{self.label}" if self.label else self.kind

    def get(self, key: str) -> Optional[_Entry]:
        return self.entries.get(key)


def read_sections(text: str, path: Optional[str] = None) -> List[_Section]:
    """Split scenario text into sections, keeping line numbers"""
    sections: List[_Section] = []
    current: Optional[_Section] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION.match(line)
        if header:
            kind, label = header.group(1), header.group(2)
            if kind not in _SECTIONS:
                raise ScenarioError(f"unknown section [{kind}]", line=number, path=path)
            if (kind in _LABELLED) != (label is not None):
                raise ScenarioError(f"section [{kind}] {'needs' if kind in _LABELLED else 'takes no'} label",
                                    section=kind, line=number, path=path)
            if any(s.kind == kind and s.label == label for s in sections):
                raise ScenarioError("duplicate section", section=header.group(0)[1:-1], line=number, path=path)
            current = _Section(kind, label, number)
            sections.append(current)
            continue
        if current is None:
            raise ScenarioError("entry outside of any section", line=number, path=path)
        if "=" not in line:
            raise ScenarioError("expected 'key = value'", section=current.title, line=number, path=path)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY.match(key):
            raise ScenarioError(f"invalid key {key!r}", section=current.title, line=number, path=path)
        if key in current.entries:
            raise ScenarioError("duplicate key", section=current.title, key=key, line=number, path=path)
        current.entries[key] = _Entry(key, value, number)
    return sections


class _Loader:
    """Turns sections into a validated Scenario"""

    def __init__(self, sections: List[_Section], path: Optional[str]):
        self.sections = sections
        self.path = path
        self.params: Dict[str, float] = {}
        self.definitions: Dict[str, Expr] = {}
        self.n = 0

    # helpers

    def section(self, kind: str, required: bool = False) -> Optional[_Section]:
        found = [s for s in self.sections if s.kind == kind]
        if not found and required:
            raise ScenarioError("missing section", section=kind, path=self.path)
        return found[0] if found else None

    def labelled(self, kind: str) -> List[_Section]:
        return [s for s in self.sections if s.kind == kind]

    def fail(self, message: str, section: _Section, entry: Optional[_Entry] = None, offset: Optional[int] = None):
        raise ScenarioError(
            message,
            section=section.title,
            key=entry.key if entry else None,
            line=entry.line if entry else section.line,
            offset=offset,
            path=self.path,
        )

    def expression(self, section: _Section, entry: _Entry, allow_coordinates: bool = True) -> Expr:
        names = list(self.params) + list(self.definitions)
        try:
            tree = parse(entry.value, parameters=names, dimension=self.n or None)
        except ExpressionSyntaxError as exc:
            self.fail(str(exc), section, entry, exc.offset)
        except ExpressionError as exc:
            self.fail(str(exc), section, entry)
        tree = substitute(tree, self.definitions)
        if not allow_coordinates:
            coordinates = sorted(name for name in free_variables(tree) if name not in self.params)
            if coordinates:
                self.fail(f"must be constant, depends on {', '.join(coordinates)}", section, entry)
        return tree

    def optional(self, section: _Section, key: str, default: Expr = ZERO) -> Expr:
        entry = section.get(key)
        return default if entry is None else self.expression(section, entry)

    def check_keys(self, section: _Section, allowed):
        for key, entry in section.entries.items():
            if not allowed(key):
                self.fail("unexpected key", section, entry)

    def indexed(self, key: str, prefix: str) -> Optional[int]:
        """Zero-based index of <prefix><i> keys within the dimension"""
        match = re.fullmatch(rf"{prefix}([1-9][0-9]*)", key)
        if match is None:
            return None
        index = int(match.group(1)) - 1
        return index if index < self.n else -1

    def in_range(self, key: str, *prefixes: str) -> bool:
        indices = (self.indexed(key, prefix) for prefix in prefixes)
        return any(index is not None and index >= 0 for index in indices)

    def index_or_fail(self, section: _Section, entry: _Entry, prefix: str) -> int:
        index = self.indexed(entry.key, prefix)
        if index is None:
            self.fail("unexpected key", section, entry)
        if index < 0:
            self.fail(f"index out of range for dimension {self.n}", section, entry)
        return index

    def check_list(self, section: _Section, entry: _Entry, known) -> Tuple[str, ...]:
        names = tuple(item.strip() for item in entry.value.split(",") if item.strip())
        for name in names:
            if name not in known:
                self.fail(f"unknown check {name!r} (known: {', '.join(known)})", section, entry)
        return names

    # sections

    def info(self) -> ScenarioInfo:
        section = self.section("scenario", required=True)
        self.check_keys(section, lambda key: key in ScenarioInfo.model_fields)
        values = {key: entry.value for key, entry in section.entries.items()}
        try:
            info = ScenarioInfo.model_validate(values)
        except ValidationError as exc:
            error = exc.errors()[0]
            key = str(error["loc"][0]) if error["loc"] else None
            entry = section.get(key) if key else None
            self.fail(error["msg"], section, entry)
        self.n = info.dimension
        return info

    def parameters(self):
        section = self.section("parameters")
        for entry in (section.entries.values() if section else ()):
            if is_coordinate(entry.key):
                self.fail("reserved coordinate name", section, entry)
            value = self.expression(section, entry, allow_coordinates=False)
            try:
                self.params[entry.key] = evaluate(value, Bindings(params=self.params))
            except ExpressionError as exc:
                self.fail(str(exc), section, entry)
        section = self.section("definitions")
        for entry in (section.entries.values() if section else ()):
            if entry.key in self.params or is_coordinate(entry.key):
                self.fail("definition shadows a parameter or coordinate", section, entry)
            self.definitions[entry.key] = self.expression(section, entry)

    def lagrangian(self) -> NaturalLagrangian:
        section = self.section("lagrangian", required=True)
        entries: Dict[Tuple[int, int], Expr] = {}
        linear: Dict[int, Expr] = {}
        potential = ZERO
        for key, entry in section.entries.items():
            if key == "V":
                potential = self.expression(section, entry)
                continue
            mass = re.fullmatch(r"M([1-9])([1-9])", key)
            if mass:
                i, j = int(mass.group(1)) - 1, int(mass.group(2)) - 1
                if i > j or j >= self.n:
                    self.fail("mass entries are M<i><j> with i <= j <= dimension", section, entry)
                entries[(i, j)] = self.expression(section, entry)
                continue
            linear[self.index_or_fail(section, entry, "b")] = self.expression(section, entry)
        for i in range(self.n):
            if (i, i) not in entries:
                self.fail(f"missing diagonal mass entry M{i + 1}{i + 1}", section)
        for (i, j), value in entries.items():
            if any(is_coordinate(name) and name.startswith("p") for name in free_variables(value)):
                self.fail(f"M{i + 1}{j + 1} may depend only on (t, q)", section, section.get(f"M{i + 1}{j + 1}"))
        return NaturalLagrangian.from_entries(self.n, entries, linear, potential)

    def force(self) -> Force:
        section = self.section("forces")
        components = [ZERO] * self.n
        for entry in (section.entries.values() if section else ()):
            components[self.index_or_fail(section, entry, "F")] = self.expression(section, entry)
        return Force(tuple(components))

    def constraints(self) -> Tuple[ConstraintRow, ...]:
        rows = []
        for section in self.labelled("constraint"):
            kind = section.get("kind")
            kind_value = kind.value if kind else ("holonomic" if section.get("f") else KINEMATIC)
            if kind_value == "holonomic":
                self.check_keys(section, lambda key: key in ("kind", "f"))
                entry = section.get("f")
                if entry is None:
                    self.fail("holonomic constraint needs f", section)
                try:
                    rows.append(mechanics_service.holonomic_row(section.label, self.expression(section, entry), self.n))
                except NoetherBenchError as exc:
                    self.fail(str(exc), section, entry)
            elif kind_value == KINEMATIC:
                self.check_keys(section, lambda key: key in ("kind", "a0") or self.indexed(key, "a") is not None)
                a0, coefficients = ZERO, [ZERO] * self.n
                for key, entry in section.entries.items():
                    if key == "kind":
                        continue
                    value = self.expression(section, entry)
                    if any(is_coordinate(name) and name.startswith("p") for name in free_variables(value)):
                        self.fail("constraint coefficients may depend only on (t, q)", section, entry)
                    if key == "a0":
                        a0 = value
                    else:
                        coefficients[self.index_or_fail(section, entry, "a")] = value
                rows.append(ConstraintRow(section.label, KINEMATIC, a0, tuple(coefficients)))
            else:
                self.fail(f"kind must be holonomic or {KINEMATIC}", section, kind)
        return tuple(sorted(rows, key=lambda row: not row.is_holonomic))

    def one_form(self, section: _Section, prefix: str) -> Optional[OneForm]:
        keys = [key for key in section.entries if key.startswith(prefix + "_")]
        if not keys:
            return None
        dq = [self.optional(section, f"{prefix}_q{i + 1}") for i in range(self.n)]
        dp = [self.optional(section, f"{prefix}_p{i + 1}") for i in range(self.n)]
        return OneForm(self.optional(section, f"{prefix}_t"), tuple(dq), tuple(dp))

    def symmetry(self, section: _Section) -> SymmetryCase:
        def allowed(key: str) -> bool:
            if key in ("tau", "f", "checks", "beta_t", "gamma_t"):
                return True
            return self.in_range(key, "xi", "xi0_", "beta_q", "beta_p", "gamma_q", "gamma_p")

        self.check_keys(section, allowed)
        spec = SymmetrySpec(
            label=section.label,
            tau=self.optional(section, "tau"),
            xi=tuple(self.optional(section, f"xi{i + 1}") for i in range(self.n)),
            gauge=self.optional(section, "f"),
            beta=self.one_form(section, "beta"),
        )
        for component in spec.base:
            if any(is_coordinate(name) and name.startswith("p") for name in free_variables(component)):
                self.fail("tau and xi may depend only on (t, q)", section)
        if spec.beta is not None:
            closed = symmetry_service.check_closed(spec.beta, self.params)
            if not closed.passed:
                self.fail(f"beta is not closed (residual {closed.residual:.3e})", section)
        xi0 = None
        if any(key.startswith("xi0_") for key in section.entries):
            xi0 = tuple(self.optional(section, f"xi0_{i + 1}") for i in range(self.n))
            if any(is_coordinate(name) and name.startswith("p") for e in xi0 for name in free_variables(e)):
                self.fail("xi0 may depend only on (t, q)", section)
        entry = section.get("checks")
        checks = self.check_list(section, entry, SYMMETRY_CHECKS) if entry else ("conservation",)
        if "moving_energy" in checks and xi0 is None:
            self.fail("moving_energy needs xi0_<i> entries", section, entry)
        return SymmetryCase(spec=spec, checks=checks, gamma=self.one_form(section, "gamma"), xi0=xi0)

    def integration(self) -> IntegrationSettings:
        section = self.section("integration", required=True)
        values: Dict[str, object] = {}
        for key in ("t0", "h"):
            entry = section.get(key)
            if entry is not None:
                values[key] = evaluate(self.expression(section, entry, allow_coordinates=False),
                                       Bindings(params=self.params))
        for key in ("steps", "seed"):
            entry = section.get(key)
            if entry is not None:
                values[key] = entry.value
        entry = section.get("projection")
        if entry is not None:
            flag = entry.value.lower()
            if flag not in _TRUE + _FALSE:
                self.fail("projection must be true or false", section, entry)
            values["projection"] = flag in _TRUE
        t0 = float(values.get("t0", 0.0))
        q0 = []
        for i in range(self.n):
            q0.append(self.initial_value(section, f"q{i + 1}", t0, q0, []))
        p0 = []
        for i in range(self.n):
            p0.append(self.initial_value(section, f"p{i + 1}", t0, q0, p0))
        values.update(q0=q0, p0=p0)
        self.check_keys(section, lambda key: key in ("t0", "h", "steps", "seed", "projection")
                        or self.in_range(key, "q", "p"))
        try:
            return IntegrationSettings.model_validate(values)
        except ValidationError as exc:
            error = exc.errors()[0]
            self.fail(error["msg"], section, section.get(str(error["loc"][0])))

    def initial_value(self, section: _Section, key: str, t0: float, q0: List[float], p0: List[float]) -> float:
        """q values may use t; p values may also use q and earlier p"""
        entry = section.get(key)
        if entry is None:
            self.fail(f"missing initial value {key}", section)
        value = self.expression(section, entry)
        try:
            return evaluate(value, Bindings(t=t0, q=q0, p=p0, params=self.params))
        except ExpressionError as exc:
            self.fail(f"initial value cannot be evaluated: {exc}", section, entry)

    def system_checks(self) -> Tuple[str, ...]:
        section = self.section("checks")
        if section is None:
            return ()
        self.check_keys(section, lambda key: key == "system")
        entry = section.get("system")
        return self.check_list(section, entry, SYSTEM_CHECKS) if entry else ()

    def tolerances(self) -> Tolerances:
        section = self.section("tolerances")
        values = {}
        for entry in (section.entries.values() if section else ()):
            if entry.key not in Tolerances.model_fields:
                self.fail(f"unknown tolerance (known: {', '.join(Tolerances.model_fields)})", section, entry)
            values[entry.key] = evaluate(self.expression(section, entry, allow_coordinates=False),
                                         Bindings(params=self.params))
        return Tolerances.model_validate(values)

    def load(self) -> Scenario:
        info = self.info()
        self.parameters()
        system = MechSystem(
            lagrangian=self.lagrangian(),
            force=self.force(),
            rows=self.constraints(),
            params=dict(self.params),
        )
        symmetries = tuple(self.symmetry(section) for section in self.labelled("symmetry"))
        return Scenario(
            info=info,
            system=system,
            integration=self.integration(),
            symmetries=symmetries,
            checks=self.system_checks(),
            tolerances=self.tolerances(),
            source=self.path,
        )


class ScenarioService:
    """Service for scenario ingestion and the builtin library"""

    def parse_scenario(self, text: str, path: Optional[str] = None) -> Scenario:
        scenario = _Loader(read_sections(text, path), path).load()
        return self.settle_initial_state(scenario)

    def load_scenario(self, target: Union[str, Path]) -> Scenario:
        """Load a builtin by name or a scenario file by path"""
        path = self.resolve(target)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario: {exc}", path=str(path))
        scenario = self.parse_scenario(text, str(path))
        logger.info(f"Loaded scenario {scenario.name} (n={scenario.system.n}, k={scenario.system.k})")
        return scenario

    def resolve(self, target: Union[str, Path]) -> Path:
        path = Path(target)
        if path.suffix == SCENARIO_SUFFIX or path.exists():
            if not path.exists():
                raise ScenarioError("scenario file not found", path=str(path))
            return path
        builtin = BUILTIN_DIR / f"{target}{SCENARIO_SUFFIX}"
        if builtin.exists():
            return builtin
        raise ScenarioError(f"unknown scenario {str(target)!r}: not a file and not a builtin")

    def settle_initial_state(self, scenario: Scenario) -> Scenario:
        """The initial state must lie within TOL_INITIAL of the manifold; it is then projected onto it"""
        sys = scenario.system
        state = scenario.initial_state()
        try:
            mechanics_service.factor_mass(mechanics_service.lagrangian_data(sys, state.t, state.q)[0], state.t)
            residual = constraint_service.manifold_residual(sys, state)
        except NoetherBenchError as exc:
            raise ScenarioError(f"initial state rejected: {exc}", section="integration", path=scenario.source)
        if residual > settings.TOL_INITIAL:
            raise ScenarioError(
                f"initial state is off the constrained manifold: residual {residual:.3e} > {settings.TOL_INITIAL:.1e}",
                section="integration",
                path=scenario.source,
            )
        try:
            projected = dynamics_service.project_to_manifold(sys, state)
        except NoetherBenchError as exc:
            raise ScenarioError(f"initial state cannot be projected: {exc}", section="integration",
                                path=scenario.source)
        if np.array_equal(projected.q, state.q) and np.array_equal(projected.p, state.p):
            return scenario
        logger.debug(f"Initial state projected onto the manifold (residual was {residual:.3e})")
        integration = scenario.integration.model_copy(
            update={"q0": projected.q.tolist(), "p0": projected.p.tolist()}
        )
        return replace(scenario, integration=integration)

    def check(self, target: Union[str, Path]) -> Scenario:
        """Validate only: parse, check closedness and the initial state"""
        scenario = self.load_scenario(target)
        initial = scenario.initial_state()
        for case in scenario.symmetries:
            symmetry_service.noether_function(case.spec, scenario.system, initial)
        return scenario

    def builtin_paths(self) -> List[Path]:
        return sorted(BUILTIN_DIR.glob(f"*{SCENARIO_SUFFIX}"))

    def list_builtins(self) -> List[Tuple[str, str, str]]:
        """(name, description, anchor) for every builtin"""
        listing = []
        for path in self.builtin_paths():
            info = _Loader(read_sections(path.read_text(encoding="utf-8"), str(path)), str(path)).info()
            listing.append((info.name, info.description, info.anchor))
        return listing

    def format_builtins(self) -> str:
        rows = self.list_builtins()
        width = max((len(name) for name, _, _ in rows), default=0)
        lines = []
        for name, description, anchor in rows:
            lines.append(f"{name:<{width}}  {description}" + (f"  [{anchor}]" if anchor else ""))
        return "\n".join(lines)


scenario_service = ScenarioService()
