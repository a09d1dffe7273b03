"""
YAML mission files.

A mission file has the sections ``agents``, ``environment``, ``mission``, ``timing``,
``bounds`` and ``solver``::

    agents:
      - {name: d1, position: [0, 0, 1]}
      - {name: d2, position: [4, 0, 1]}
    environment:
      workspace: {lo: [-1, -3, 0], hi: [5, 3, 3]}
      goals:
        g1: {lo: [3.5, -0.5, 0.5], hi: [4.5, 0.5, 1.5]}
        g2: {lo: [-0.5, -0.5, 0.5], hi: [0.5, 0.5, 1.5]}
      obstacles:
        wall: {lo: [1.5, -0.5, 0], hi: [2.5, 0.5, 3]}
      delta_min: 0.5
    mission:
      builtin: reach_avoid
      assignments: {d1: g1, d2: g2}
    timing: {T: 10}
    bounds: {vmax: 3, amax: 5}

Errors name the offending field as ``section.key``.
"""
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from stlfleet.exceptions import (
    StlFleetBadParamException,
    StlFleetException,
    StlFleetHorizonException,
    StlFleetMissionFileException,
    StlFleetUnknownNameException,
)
from stlfleet.missions import Environment, powerline_inspection, reach_avoid
from stlfleet.planner import AgentSpec, MissionSpec, PlannerConfig
from stlfleet.primitives import ZERO, KinematicBounds, KnotState, Vec3
from stlfleet.stl.formula import Box, Formula, horizon
from stlfleet.stl.parser import parse_formula

POWERLINE_TIME_FRACTION = 2.0 / 3.0


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class _BoxEntry(_Section):
    lo: Vec3
    hi: Vec3


class _AgentEntry(_Section):
    name: str
    position: Vec3
    velocity: Vec3 = ZERO
    acceleration: Vec3 = ZERO


class _EnvironmentSection(_Section):
    workspace: _BoxEntry
    goals: dict[str, _BoxEntry] = {}
    obstacles: dict[str, _BoxEntry] = {}
    poles: list[_BoxEntry] = []
    delta_min: float


class _MissionSection(_Section):
    builtin: Literal["reach_avoid", "powerline"] | None = None
    assignments: dict[str, str] = {}
    formula: str | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "_MissionSection":
        if (self.builtin is None) == (self.formula is None):
            raise ValueError("exactly one of 'builtin' and 'formula' is required")
        return self


class _TimingSection(_Section):
    T: float
    Ts: float = 0.1
    knots: int = 5


class _BoundsSection(_Section):
    vmax: float
    amax: float


class _SolverSection(_Section):
    epsilon: float = Field(0.01, gt=0, allow_inf_nan=False)
    restarts: int = 8
    max_iters: int = 300
    seed: int = 0
    temperature: float = 25.0
    temperature_schedule: list[float] = [10.0, 50.0]
    penalty_weight: float = Field(100.0, alias="lambda")
    time_budget_s: float = 60.0
    workers: int = 1
    stop_on_success: bool = True
    objective_tolerance: float = 1e-6


class MissionFile(BaseModel):
    """Schema of a mission file."""

    model_config = ConfigDict(extra="forbid")

    agents: list[_AgentEntry] = Field(min_length=1)
    environment: _EnvironmentSection
    mission: _MissionSection
    timing: _TimingSection
    bounds: _BoundsSection
    solver: _SolverSection = _SolverSection()


def _field_path(error: Mapping[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "<root>"


def _box(entry: _BoxEntry) -> Box:
    return Box(lo=entry.lo, hi=entry.hi)


def _environment(section: _EnvironmentSection) -> Environment:
    try:
        return Environment(
            workspace=_box(section.workspace),
            goals={name: _box(box) for name, box in section.goals.items()},
            obstacles={name: _box(box) for name, box in section.obstacles.items()},
            poles=tuple(_box(box) for box in section.poles),
            delta_min=section.delta_min,
        )
    except StlFleetException as exc:
        raise StlFleetMissionFileException("environment", str(exc)) from exc


def _formula(doc: MissionFile, env: Environment) -> Formula:
    mission, T = doc.mission, doc.timing.T
    try:
        if mission.formula is not None:
            return parse_formula(mission.formula)
        if mission.builtin == "reach_avoid":
            assignments = mission.assignments or {}
            missing = [agent.name for agent in doc.agents if agent.name not in assignments]
            if missing:
                raise StlFleetMissionFileException("mission.assignments", f"no goal assigned to {missing}")
            return reach_avoid(env, {agent.name: assignments[agent.name] for agent in doc.agents}, T)
        return powerline_inspection(env, [agent.name for agent in doc.agents], POWERLINE_TIME_FRACTION * T)
    except StlFleetMissionFileException:
        raise
    except StlFleetException as exc:
        raise StlFleetMissionFileException("mission", str(exc)) from exc


def build_mission(doc: MissionFile) -> MissionSpec:
    """
    Turn a validated mission file into a :class:`MissionSpec`.

    For ``builtin: powerline`` the mission duration handed to the builder is ``2T/3``,
    so the formula horizon equals ``T``.

    :raises StlFleetMissionFileException: For every invalid value or unresolved reference.
    """
    env = _environment(doc.environment)
    formula = _formula(doc, env)
    solver = doc.solver
    try:
        bounds = KinematicBounds(vmax=doc.bounds.vmax, amax=doc.bounds.amax)
    except StlFleetException as exc:
        raise StlFleetMissionFileException("bounds", str(exc)) from exc
    try:
        agents = tuple(
            AgentSpec(name=a.name, x0=KnotState(p=a.position, v=a.velocity, a=a.acceleration)) for a in doc.agents
        )
    except StlFleetException as exc:
        raise StlFleetMissionFileException("agents", str(exc)) from exc
    try:
        config = PlannerConfig(
            restarts=solver.restarts,
            max_iterations=solver.max_iters,
            temperature_schedule=tuple(solver.temperature_schedule),
            temperature=solver.temperature,
            penalty_weight=solver.penalty_weight,
            seed=solver.seed,
            time_budget_s=solver.time_budget_s,
            workers=solver.workers,
            stop_on_success=solver.stop_on_success,
            objective_tolerance=solver.objective_tolerance,
        )
    except ValidationError as exc:
        error = exc.errors()[0]
        raise StlFleetMissionFileException(f"solver.{_field_path(error)}", error["msg"]) from exc
    except StlFleetException as exc:
        raise StlFleetMissionFileException("solver", str(exc)) from exc
    try:
        return MissionSpec(
            environment=env,
            agents=agents,
            formula=formula,
            T=doc.timing.T,
            ts=doc.timing.Ts,
            knots=doc.timing.knots,
            bounds=bounds,
            epsilon=solver.epsilon,
            solver=config,
        )
    except StlFleetHorizonException as exc:
        raise StlFleetMissionFileException("timing.T", str(exc)) from exc
    except StlFleetUnknownNameException as exc:
        raise StlFleetMissionFileException("mission.formula", str(exc)) from exc
    except StlFleetBadParamException as exc:
        raise StlFleetMissionFileException("agents", str(exc)) from exc
    except StlFleetException as exc:
        raise StlFleetMissionFileException("mission", str(exc)) from exc


def load_mission(path: str | Path, overrides: Mapping[str, Any] | None = None) -> MissionSpec:
    """
    Load and validate a mission file.

    :param path: The YAML file.
    :param overrides: Values replacing keys of the ``solver`` section.
    :return: The mission, with defaults applied and every reference resolved.
    :raises StlFleetMissionFileException: If the file cannot be read or is invalid.
    """
    path = Path(path)
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StlFleetMissionFileException("file", f"cannot read {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise StlFleetMissionFileException("file", f"invalid YAML: {exc}") from exc
    if not isinstance(document, dict):
        raise StlFleetMissionFileException("file", "a mission file must be a mapping of sections")
    if overrides:
        solver = document.get("solver") or {}
        if not isinstance(solver, dict):
            raise StlFleetMissionFileException("solver", "must be a mapping")
        document = {**document, "solver": {**solver, **overrides}}
    try:
        doc = MissionFile.model_validate(document)
    except ValidationError as exc:
        error = exc.errors()[0]
        raise StlFleetMissionFileException(_field_path(error), error["msg"]) from exc
    spec = build_mission(doc)
    logger.info(
        "loaded mission {}: {} agents, T={} s, horizon {} s", path, len(spec.agents), spec.T, horizon(spec.formula)
    )
    return spec
