"""
Multi-agent trajectory planning by smooth-robustness ascent.

A plan is parameterised by the kinematic states of every agent at the ``M`` segment
boundaries after ``t = 0`` (knot 0 is pinned to the agent's initial state). Segments
of equal duration ``T / M`` are minimum-jerk quintics, so the sampled trajectory is a
linear function of the knot states; :class:`TrajectoryMap` holds that linear map.

:func:`plan` maximises ``rho_tilde(L(q)) - lambda * kinematic penalty`` from several
starting points with gradient ascent and an Armijo backtracking line search, then
keeps the best candidate by exact robustness subject to feasibility.
"""
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import NamedTuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from stlfleet.exceptions import (
    StlFleetDimensionMismatchException,
    StlFleetHorizonException,
    StlFleetInvalidSpecException,
    StlFleetNonfiniteInputException,
    StlFleetUnknownNameException,
)
from stlfleet.missions import WORKSPACE, Environment
from stlfleet.primitives import (
    FeasibilityReport,
    KinematicBounds,
    KnotState,
    QuinticSegment,
    axis_extrema,
    check_feasibility,
    quintic_coefficients,
    sample_segment,
    solve_segment,
)
from stlfleet.robustness import (
    DEFAULT_TEMPERATURE,
    boolean_satisfaction,
    check_windows,
    robustness,
    robustness_signal,
    smooth_robustness,
    smooth_robustness_and_gradient,
    smoothing_gap_bound,
)
from stlfleet.stl.formula import (
    And,
    Box,
    Formula,
    Implies,
    InsideBox,
    Not,
    Pred,
    bind_regions,
    children,
    formula_agents,
    horizon,
)
from stlfleet.trajectory import Trace
from stlfleet.utils import SNAP_TOLERANCE, ceil_steps, snap, timed
from stlfleet.validators import validate_temperature, validate_unique_names

PENALTY_STEP = 1e-6


class PlanStatus(str, Enum):
    """Outcome of a planning run."""

    SUCCESS = "Success"
    ROBUSTNESS_BELOW_EPSILON = "RobustnessBelowEpsilon"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"


class PlannerConfig(BaseModel):
    """
    Solver settings.

    The iteration budget of a restart is split evenly over the phases of
    ``temperature_schedule``; ``temperature`` is the temperature at which the smooth
    robustness of the result is reported.

    With ``stop_on_success`` no restart is started once an earlier one holds a
    successful candidate, and a restart holding one stops as soon as an accepted step
    improves the objective by at most ``objective_tolerance``. The last
    ``min(assembly_reserve_s, time_budget_s / 20)`` seconds of the budget are left for
    assembling and checking the chosen plan.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    restarts: int = Field(8, ge=1)
    max_iterations: int = Field(300, ge=0)
    temperature_schedule: tuple[float, ...] = Field((10.0, 50.0), min_length=1)
    temperature: float = DEFAULT_TEMPERATURE
    penalty_weight: float = Field(100.0, ge=0)
    seed: int = Field(0, ge=0)
    time_budget_s: float = Field(60.0, gt=0)
    jitter_sigma: float = Field(0.5, ge=0)
    initial_step: float = Field(0.1, gt=0)
    min_step: float = Field(1e-10, gt=0)
    armijo_c: float = Field(1e-4, gt=0, lt=1)
    gradient_tolerance: float = Field(1e-9, ge=0)
    workers: int = Field(1, ge=1)
    stop_on_success: bool = True
    objective_tolerance: float = Field(1e-6, ge=0)
    assembly_reserve_s: float = Field(1.0, ge=0)

    @field_validator("temperature_schedule")
    @classmethod
    def _check_schedule(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        return tuple(validate_temperature(k) for k in value)

    @field_validator("temperature")
    @classmethod
    def _check_temperature(cls, value: float) -> float:
        return validate_temperature(value)


class AgentSpec(BaseModel):
    """An agent and its initial state."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    x0: KnotState


class MissionSpec(BaseModel):
    """
    Everything :func:`plan` needs.

    :ivar environment: Named regions and the separation distance.
    :ivar agents: Agents in fleet order.
    :ivar formula: The mission formula, with region names unresolved.
    :ivar T: Trajectory duration, seconds; a whole number of sampling periods.
    :ivar ts: Sampling period, seconds.
    :ivar knots: Segments (free knots) per agent.
    :ivar bounds: Per-axis kinematic limits.
    :ivar epsilon: Minimum exact robustness of a successful plan, meters.
    :ivar solver: Solver settings.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    environment: Environment
    agents: tuple[AgentSpec, ...] = Field(min_length=1)
    formula: Formula
    T: float
    ts: float = 0.1
    knots: int = 5
    bounds: KinematicBounds
    epsilon: float = 0.01
    solver: PlannerConfig = PlannerConfig()

    @model_validator(mode="after")
    def _check_mission(self) -> "MissionSpec":
        if not (math.isfinite(self.T) and self.T > 0):
            raise StlFleetInvalidSpecException(f"T must be finite and > 0, got {self.T}")
        if not (math.isfinite(self.ts) and self.ts > 0):
            raise StlFleetInvalidSpecException(f"Ts must be finite and > 0, got {self.ts}")
        if self.knots < 1:
            raise StlFleetInvalidSpecException(f"knots must be >= 1, got {self.knots}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise StlFleetInvalidSpecException(f"epsilon must be finite and > 0, got {self.epsilon}")
        steps = snap(self.T / self.ts)
        if steps != round(steps):
            raise StlFleetInvalidSpecException(f"T={self.T} is not a whole number of periods Ts={self.ts}")
        names = [agent.name for agent in self.agents]
        validate_unique_names(names)
        unknown = sorted(formula_agents(self.formula) - set(names))
        if unknown:
            raise StlFleetUnknownNameException(unknown[0], "agent")
        bind_regions(self.formula, self.environment.regions())
        required = horizon(self.formula)
        if required > self.T * (1 + SNAP_TOLERANCE):
            raise StlFleetHorizonException(f"formula horizon {required} s exceeds T={self.T} s")
        check_windows(self.formula, self.ts)
        return self

    @property
    def agent_names(self) -> tuple[str, ...]:
        """Agent names in fleet order."""
        return tuple(agent.name for agent in self.agents)

    @property
    def n_steps(self) -> int:
        """``N = T / Ts``; traces have ``N + 1`` samples."""
        return int(round(self.T / self.ts))

    @property
    def segment_duration(self) -> float:
        """``T / M``."""
        return self.T / self.knots

    @cached_property
    def bound_formula(self) -> Formula:
        """The formula with every region resolved against the environment."""
        return bind_regions(self.formula, self.environment.regions())

    @cached_property
    def initial_states(self) -> np.ndarray:
        """``(A, 3, 3)`` initial states, rows ``p``, ``v``, ``a``."""
        return np.stack([agent.x0.as_array() for agent in self.agents])

    @cached_property
    def trajectory_map(self) -> "TrajectoryMap":
        """The linear sampling map of this mission."""
        return TrajectoryMap.build(self)


@dataclass(frozen=True)
class DecisionVector:
    """
    Free knot states of every agent.

    :ivar knots: ``(A, M, 3, 3)`` array; ``knots[a, m]`` is the state of agent ``a`` at
        time ``(m + 1) T / M`` with rows ``p``, ``v``, ``a``.
    """

    knots: np.ndarray

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        if knots.ndim != 4 or knots.shape[2:] != (3, 3):
            raise StlFleetDimensionMismatchException(f"knots have shape {knots.shape}, expected (A, M, 3, 3)")
        if not np.all(np.isfinite(knots)):
            raise StlFleetNonfiniteInputException("decision vector has non-finite components")
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)

    @classmethod
    def from_flat(cls, flat, n_agents: int, n_knots: int) -> "DecisionVector":
        """Inverse of :attr:`flat`."""
        flat = np.asarray(flat, dtype=float)
        if flat.size != 9 * n_agents * n_knots:
            raise StlFleetDimensionMismatchException(
                f"flat vector has {flat.size} entries, expected {9 * n_agents * n_knots}"
            )
        return cls(flat.reshape(n_agents, n_knots, 3, 3))

    @property
    def flat(self) -> np.ndarray:
        """The decision variables as one vector, ``9 M`` entries per agent."""
        return self.knots.ravel().copy()

    def knot_state(self, agent: int, knot: int) -> KnotState:
        """State of agent ``agent`` at free knot ``knot`` (0-based)."""
        return KnotState.from_array(self.knots[agent, knot])

    def check_dimensions(self, spec: MissionSpec) -> None:
        """
        :raises StlFleetDimensionMismatchException: If the shape does not match the mission.
        """
        expected = (len(spec.agents), spec.knots)
        if self.knots.shape[:2] != expected:
            raise StlFleetDimensionMismatchException(
                f"decision vector is for {self.knots.shape[:2]} (agents, knots), mission has {expected}"
            )


def _segment_starts(spec: MissionSpec) -> np.ndarray:
    """First sample index of every segment, plus ``N + 1``."""
    tau = spec.segment_duration
    starts = [ceil_steps(m * tau, spec.ts) for m in range(spec.knots)]
    return np.array([*starts, spec.n_steps + 1])


def _segment_offset(spec: MissionSpec, segment: int, first_sample: int) -> float:
    return min(max(first_sample * spec.ts - segment * spec.segment_duration, 0.0), math.nextafter(spec.ts, 0.0))


def _knot_states(q: DecisionVector, spec: MissionSpec) -> np.ndarray:
    """``(A, M + 1, 3, 3)`` boundary states including the pinned initial state."""
    return np.concatenate([spec.initial_states[:, None], q.knots], axis=1)


@dataclass(frozen=True)
class TrajectoryMap:
    """
    Linear map from boundary states to sampled kinematics.

    :ivar weights: ``(3, N + 1, M + 1, 3)`` array: for output ``p``, ``v``, ``a`` and sample
        ``i``, the weight of boundary ``k``'s ``p``, ``v``, ``a`` component (same axis).
    """

    weights: np.ndarray

    @classmethod
    def build(cls, spec: MissionSpec) -> "TrajectoryMap":
        """
        Assemble the map from unit boundary conditions.

        Axes are decoupled and all segments share one duration, so six scalar unit
        segments determine every weight.
        """
        tau = spec.segment_duration
        starts = _segment_starts(spec)
        weights = np.zeros((3, spec.n_steps + 1, spec.knots + 1, 3))
        for side in (0, 1):
            for component in range(3):
                boundary = np.zeros((2, 3, 3))
                boundary[side, component] = 1.0
                unit = solve_segment(KnotState.from_array(boundary[0]), KnotState.from_array(boundary[1]), tau)
                for m in range(spec.knots):
                    first, stop = starts[m], starts[m + 1]
                    _, *outputs = sample_segment(unit, spec.ts, _segment_offset(spec, m, first))
                    for output, values in enumerate(outputs):
                        weights[output, first:stop, m + side, component] = values[: stop - first, 0]
        weights.setflags(write=False)
        return cls(weights)

    def apply(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Sample positions, velocities and accelerations from boundary states.

        :param states: ``(A, M + 1, 3, 3)`` boundary states.
        :return: Three ``(N + 1, A, 3)`` arrays.
        """
        return tuple(np.einsum("nkc,akcx->nax", self.weights[output], states) for output in range(3))

    def pullback(self, position_gradient: np.ndarray) -> np.ndarray:
        """
        Gradient with respect to the boundary states of a function of the positions.

        :param position_gradient: ``(N + 1, A, 3)`` gradient with respect to the positions.
        :return: ``(A, M + 1, 3, 3)`` gradient.
        """
        return np.einsum("nkc,nax->akcx", self.weights[0], position_gradient)


def assemble_trajectory(q: DecisionVector, spec: MissionSpec) -> Trace:
    """
    Sample the spline trajectories of a decision vector.

    Each agent's segments are solved between consecutive knots and sampled at ``Ts``
    over ``[0, T]``; a sample on a segment boundary is taken from the later segment.

    :param q: The decision vector.
    :param spec: The mission.
    :return: A trace of ``N + 1`` samples.
    :raises StlFleetDimensionMismatchException: If ``q`` does not match the mission.
    """
    q.check_dimensions(spec)
    states = _knot_states(q, spec)
    starts = _segment_starts(spec)
    shape = (spec.n_steps + 1, len(spec.agents), 3)
    samples = [np.empty(shape) for _ in range(3)]
    for a in range(len(spec.agents)):
        for m in range(spec.knots):
            segment = solve_segment(
                KnotState.from_array(states[a, m]), KnotState.from_array(states[a, m + 1]), spec.segment_duration
            )
            first, stop = starts[m], starts[m + 1]
            _, *outputs = sample_segment(segment, spec.ts, _segment_offset(spec, m, first))
            for target, values in zip(samples, outputs):
                target[first:stop, a] = values[: stop - first]
    return Trace(spec.ts, spec.agent_names, *samples)


def plan_segments(q: DecisionVector, spec: MissionSpec) -> list[list[QuinticSegment]]:
    """The solved segments of every agent, in fleet order."""
    q.check_dimensions(spec)
    states = _knot_states(q, spec)
    return [
        [
            solve_segment(
                KnotState.from_array(states[a, m]), KnotState.from_array(states[a, m + 1]), spec.segment_duration
            )
            for m in range(spec.knots)
        ]
        for a in range(len(spec.agents))
    ]


class _Evaluation(NamedTuple):
    value: float
    smooth: float
    penalty: float
    gradient: np.ndarray | None
    trace: Trace


class _Problem:
    """The objective of one mission, with its precomputed sampling map."""

    def __init__(self, spec: MissionSpec):
        self.spec = spec
        self.formula = spec.bound_formula
        self.map = spec.trajectory_map
        self.tau = spec.segment_duration
        self.vmax = spec.bounds.vmax
        self.amax = spec.bounds.amax
        powers = np.arange(6)
        tau_powers = self.tau ** np.maximum(powers - 1, 0)
        self.velocity_scale = powers * tau_powers
        self.acceleration_scale = powers * (powers - 1) * self.tau ** np.maximum(powers - 2, 0)

    def states(self, knots: np.ndarray) -> np.ndarray:
        return np.concatenate([self.spec.initial_states[:, None], knots], axis=1)

    def trace(self, states: np.ndarray) -> Trace:
        return Trace(self.spec.ts, self.spec.agent_names, *self.map.apply(states))

    def _axis_violation(self, coefficients: np.ndarray) -> float:
        magnitudes = np.abs(coefficients)
        if magnitudes @ self.velocity_scale <= self.vmax and magnitudes @ self.acceleration_scale <= self.amax:
            return 0.0
        vpeak, apeak = axis_extrema(coefficients, self.tau)
        return min(0.0, self.vmax - vpeak) ** 2 + min(0.0, self.amax - apeak) ** 2

    def penalty(self, states: np.ndarray) -> tuple[float, list[tuple[int, int, int]]]:
        """Summed squared margin violations and the violating ``(agent, segment, axis)`` triples."""
        coefficients = quintic_coefficients(states[:, :-1], states[:, 1:], self.tau)
        total, active = 0.0, []
        for index in np.ndindex(coefficients.shape[:3]):
            violation = self._axis_violation(coefficients[index])
            if violation > 0:
                total += violation
                active.append(index)
        return total, active

    def penalty_gradient(self, states: np.ndarray, active: list[tuple[int, int, int]]) -> np.ndarray:
        """Central differences of the penalty over the boundary values of violating segments."""
        grad = np.zeros_like(states)
        for a, m, x in active:
            boundary = np.stack([states[a, m, :, x], states[a, m + 1, :, x]])
            for side in (0, 1):
                for component in range(3):
                    values = []
                    for step in (PENALTY_STEP, -PENALTY_STEP):
                        shifted = boundary.copy()
                        shifted[side, component] += step
                        coefficients = quintic_coefficients(shifted[0][:, None], shifted[1][:, None], self.tau)
                        values.append(self._axis_violation(coefficients[0]))
                    grad[a, m + side, component, x] += (values[0] - values[1]) / (2 * PENALTY_STEP)
        return grad

    def evaluate(self, knots: np.ndarray, k: float, weight: float, gradient: bool = True) -> _Evaluation:
        states = self.states(knots)
        trace = self.trace(states)
        penalty, active = self.penalty(states)
        if not gradient:
            smooth = smooth_robustness(self.formula, trace, 0, k)
            return _Evaluation(smooth - weight * penalty, smooth, penalty, None, trace)
        smooth, position_gradient = smooth_robustness_and_gradient(self.formula, trace, 0, k)
        grad = self.map.pullback(position_gradient)
        if active and weight > 0:
            grad = grad - weight * self.penalty_gradient(states, active)
        return _Evaluation(smooth - weight * penalty, smooth, penalty, grad[:, 1:], trace)


def objective(
    q: DecisionVector, spec: MissionSpec, k: float = DEFAULT_TEMPERATURE, penalty_weight: float = 100.0
) -> tuple[float, np.ndarray]:
    """
    Penalised smooth robustness of a decision vector and its gradient.

    ``J = rho_tilde(L(q)) - penalty_weight * sum of squared negative kinematic margins``
    over every segment and axis. The robustness term is differentiated exactly through
    the linear map ``L``; the penalty term by central differences.

    :param q: The decision vector.
    :param spec: The mission.
    :param k: Temperature of the smooth robustness.
    :param penalty_weight: ``lambda >= 0``.
    :return: ``(J, dJ/dq)`` with the gradient shaped like ``q.knots``.
    :raises StlFleetDimensionMismatchException: If ``q`` does not match the mission.
    """
    q.check_dimensions(spec)
    result = _Problem(spec).evaluate(q.knots, validate_temperature(k), penalty_weight)
    return result.value, result.gradient


def _target_box(node: Formula, agent: str) -> Box | None:
    if isinstance(node, Pred) and isinstance(node.predicate, InsideBox):
        p = node.predicate
        if p.agent == agent and p.region != WORKSPACE:
            return p.box
    return None


def agent_targets(spec: MissionSpec, agent: str) -> list[Box]:
    """
    Regions other than the workspace that ``agent`` must be inside, in formula order.

    Sibling ``in`` terms of one conjunction are replaced by their common volume when
    it is not empty. Negated sub-formulas and implication premises are skipped, and
    each region is listed once.
    """
    targets: list[Box] = []

    def add(box: Box) -> None:
        if box not in targets:
            targets.append(box)

    def visit(node: Formula) -> None:
        box = _target_box(node, agent)
        if box is not None:
            add(box)
            return
        if isinstance(node, Not):
            return
        if isinstance(node, Implies):
            visit(node.conclusion)
            return
        rest = children(node)
        if isinstance(node, And):
            boxes = [b for b in (_target_box(child, agent) for child in rest) if b is not None]
            common = boxes[0] if boxes else None
            for other in boxes[1:]:
                common = None if common is None else common.intersection(other)
            if len(boxes) > 1 and common is not None:
                add(common)
                rest = tuple(child for child in rest if _target_box(child, agent) is None)
        for child in rest:
            visit(child)

    visit(spec.bound_formula)
    return targets


def _arrival_knots(lengths: np.ndarray, knots: int) -> list[int]:
    """Knot index reaching each waypoint, proportional to path length; the last is ``knots``."""
    total = float(lengths.sum())
    cumulative = np.cumsum(lengths)
    arrivals, previous = [], 0
    for leg, covered in enumerate(cumulative):
        share = round(knots * covered / total) if total > 0 else knots
        latest = knots - (len(lengths) - 1 - leg)
        previous = min(max(share, previous + 1), latest)
        arrivals.append(previous)
    return arrivals


def initial_guess(spec: MissionSpec) -> DecisionVector:
    """
    Knots at rest along a polyline through each agent's target regions.

    Every agent visits :func:`agent_targets` in order, arriving at knots spaced in
    proportion to the distance covered, and reaches its last target at the final knot.
    Agents sharing a region are spread along its longest axis. Agents without a
    target hover at their initial position.
    """
    targets = {agent.name: agent_targets(spec, agent.name)[: spec.knots] for agent in spec.agents}
    sharing: dict[Box, list[str]] = {}
    for name, boxes in targets.items():
        for box in boxes:
            sharing.setdefault(box, []).append(name)

    knots = np.zeros((len(spec.agents), spec.knots, 3, 3))
    for a, agent in enumerate(spec.agents):
        start = np.asarray(agent.x0.p, dtype=float)
        points = [start]
        for box in targets[agent.name]:
            point = box.centroid
            owners = sharing[box]
            if len(owners) > 1:
                axis = int(np.argmax(np.subtract(box.hi, box.lo)))
                share = (owners.index(agent.name) + 0.5) / len(owners)
                point[axis] = box.lo[axis] + share * (box.hi[axis] - box.lo[axis])
            points.append(point)
        if len(points) == 1:
            knots[a, :, 0] = start
            continue
        path = np.array(points)
        arrivals = [0, *_arrival_knots(np.linalg.norm(np.diff(path, axis=0), axis=1), spec.knots)]
        for leg in range(1, len(path)):
            first, last = arrivals[leg - 1], arrivals[leg]
            for j in range(first + 1, last + 1):
                fraction = (j - first) / (last - first)
                knots[a, j - 1, 0] = path[leg - 1] + fraction * (path[leg] - path[leg - 1])
    return DecisionVector(knots)


class RestartDiagnostics(BaseModel):
    """
    Trace of one restart.

    :ivar history: Accepted objective values per temperature phase, starting with the
        phase's initial value.
    :ivar stop_reason: ``iterations``, ``converged``, ``line_search``, ``satisfied``,
        ``time_budget`` or ``cancelled``.
    """

    model_config = ConfigDict(frozen=True)

    restart: int
    iterations: int
    history: tuple[tuple[float, ...], ...]
    robustness: float
    penalty: float
    stop_reason: str
    wall_time_s: float


class SolverDiagnostics(BaseModel):
    """Summary of a planning run."""

    model_config = ConfigDict(frozen=True)

    restarts: tuple[RestartDiagnostics, ...]
    best_restart: int
    wall_time_s: float
    budget_exhausted: bool

    @property
    def iterations(self) -> int:
        """Accepted iterations over all restarts."""
        return sum(r.iterations for r in self.restarts)


@dataclass(frozen=True)
class PlanResult:
    """
    Result of :func:`plan`.

    :ivar status: ``Success`` iff ``robustness >= epsilon`` and every segment is feasible.
    :ivar trace: Sampled trajectories of all agents.
    :ivar robustness: Exact robustness of the trace at time 0.
    :ivar smooth_robustness: Smooth robustness at the reporting temperature.
    :ivar feasibility: Kinematic report per agent and segment, agent-major.
    :ivar decision: The knot states of the plan.
    :ivar diagnostics: Solver diagnostics.
    """

    status: PlanStatus
    trace: Trace
    robustness: float
    smooth_robustness: float
    feasibility: tuple[FeasibilityReport, ...]
    decision: DecisionVector
    diagnostics: SolverDiagnostics

    @property
    def feasible(self) -> bool:
        """Whether every segment respects the kinematic bounds."""
        return all(report.feasible for report in self.feasibility)


class _Candidate(NamedTuple):
    key: tuple[bool, float, float]
    knots: np.ndarray
    robustness: float
    penalty: float


def _candidate(problem: _Problem, knots: np.ndarray, evaluation: _Evaluation) -> _Candidate:
    rho = float(robustness_signal(problem.formula, evaluation.trace)[0])
    feasible = evaluation.penalty == 0.0
    key = (feasible, 0.0 if feasible else -evaluation.penalty, rho)
    return _Candidate(key, knots.copy(), rho, evaluation.penalty)


def _phase_lengths(cfg: PlannerConfig) -> list[int]:
    return [len(chunk) for chunk in np.array_split(np.arange(cfg.max_iterations), len(cfg.temperature_schedule))]


def _succeeds(candidate: _Candidate, epsilon: float) -> bool:
    return candidate.key[0] and candidate.robustness >= epsilon


def _run_restart(
    problem: _Problem, cfg: PlannerConfig, restart: int, deadline: float, cancelled: threading.Event
) -> tuple[_Candidate, RestartDiagnostics] | None:
    """One ascent from the initial guess, jittered unless ``restart == 0``; ``None`` when skipped."""
    started = time.monotonic()
    if restart > 0 and (started > deadline or cancelled.is_set()):
        logger.debug("restart {}: skipped", restart)
        return None
    spec = problem.spec
    rng = np.random.default_rng([cfg.seed, restart])
    knots = np.array(initial_guess(spec).knots)
    if restart > 0 and cfg.jitter_sigma > 0:
        knots[:, :, 0] += rng.normal(0.0, cfg.jitter_sigma, size=knots[:, :, 0].shape)

    weight = cfg.penalty_weight
    best = None
    history, iterations, stop_reason = [], 0, "iterations"
    step = cfg.initial_step
    for k, budget in zip(cfg.temperature_schedule, _phase_lengths(cfg)):
        stop_reason = "iterations"
        current = problem.evaluate(knots, k, weight)
        if best is None:
            best = _candidate(problem, knots, current)
        accepted = [current.value]
        for _ in range(budget):
            if cancelled.is_set():
                stop_reason = "cancelled"
                break
            if time.monotonic() > deadline:
                stop_reason = "time_budget"
                break
            direction = current.gradient
            slope = float(np.sum(direction * direction))
            if math.sqrt(slope) <= cfg.gradient_tolerance:
                stop_reason = "converged"
                break
            trial, trial_step = None, step
            while trial_step >= cfg.min_step:
                if time.monotonic() > deadline:
                    break
                point = knots + trial_step * direction
                value = problem.evaluate(point, k, weight, gradient=False).value
                if value >= current.value + cfg.armijo_c * trial_step * slope:
                    trial = point
                    break
                trial_step /= 2
            if trial is None:
                if trial_step >= cfg.min_step:
                    stop_reason = "time_budget"
                else:
                    logger.debug("restart {}: line search failed at k={} after {} iterations", restart, k, iterations)
                    stop_reason = "line_search"
                break
            knots = trial
            current = problem.evaluate(knots, k, weight)
            accepted.append(current.value)
            iterations += 1
            step = 2 * trial_step
            candidate = _candidate(problem, knots, current)
            if candidate.key > best.key:
                best = candidate
            improvement = accepted[-1] - accepted[-2]
            if cfg.stop_on_success and improvement <= cfg.objective_tolerance and _succeeds(best, spec.epsilon):
                stop_reason = "satisfied"
                break
        history.append(tuple(accepted))
        logger.debug("restart {}: phase k={} ended at J={:.6f} ({})", restart, k, current.value, stop_reason)
        if stop_reason in ("time_budget", "satisfied", "cancelled"):
            break

    diagnostics = RestartDiagnostics(
        restart=restart,
        iterations=iterations,
        history=tuple(history),
        robustness=best.robustness,
        penalty=best.penalty,
        stop_reason=stop_reason,
        wall_time_s=time.monotonic() - started,
    )
    logger.info(
        "restart {}/{}: rho={:.6f} penalty={:.3g} after {} iterations ({})",
        restart + 1,
        cfg.restarts,
        best.robustness,
        best.penalty,
        iterations,
        stop_reason,
    )
    return best, diagnostics


def _classify(rho: float, feasible: bool, epsilon: float, budget_exhausted: bool) -> PlanStatus:
    if rho >= epsilon and feasible:
        return PlanStatus.SUCCESS
    if budget_exhausted:
        return PlanStatus.BUDGET_EXHAUSTED
    if not feasible:
        return PlanStatus.INFEASIBLE
    return PlanStatus.ROBUSTNESS_BELOW_EPSILON


@timed
def plan(spec: MissionSpec, cfg: PlannerConfig | None = None) -> PlanResult:
    """
    Solve the mission by multi-start smooth-robustness ascent.

    Restart ``r`` draws its jitter from ``default_rng([seed, r])``, so the result does
    not depend on how restarts are scheduled over ``cfg.workers`` threads. The best
    candidate over all accepted iterates is the feasible one with the highest exact
    robustness, or failing that the one with the smallest penalty; ties go to the
    earlier restart.

    With ``cfg.stop_on_success`` the run keeps restarts up to the first one whose best
    candidate succeeds and drops the rest. Restarts after the first are skipped once the
    deadline has passed, which counts as an exhausted budget.

    :param spec: The mission.
    :param cfg: Solver settings; defaults to ``spec.solver``.
    :return: The plan; non-convergence is reported through its status.
    """
    cfg = cfg or spec.solver
    started = time.monotonic()
    deadline = started + cfg.time_budget_s - min(cfg.assembly_reserve_s, cfg.time_budget_s / 20)
    problem = _Problem(spec)
    cancelled = threading.Event()
    logger.info(
        "planning {} agents over {} s with {} restarts (seed {})", len(spec.agents), spec.T, cfg.restarts, cfg.seed
    )

    def run(restart: int):
        return _run_restart(problem, cfg, restart, deadline, cancelled)

    outcomes, solved = [], False
    pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    with pool or nullcontext():
        # restarts are consumed in order so that only 0..r* survive a success at r*
        pending = [pool.submit(run, r) for r in range(cfg.restarts)] if pool else []
        for restart in range(cfg.restarts):
            outcome = pending[restart].result() if pending else run(restart)
            if outcome is None:
                continue
            outcomes.append(outcome)
            if cfg.stop_on_success and _succeeds(outcome[0], spec.epsilon):
                solved = True
                cancelled.set()
                for future in pending:
                    future.cancel()
                break

    best, best_diagnostics = outcomes[0]
    for candidate, restart_diagnostics in outcomes[1:]:
        if candidate.key > best.key:
            best, best_diagnostics = candidate, restart_diagnostics
    best_restart = best_diagnostics.restart
    skipped = not solved and len(outcomes) < cfg.restarts
    budget_exhausted = skipped or any(d.stop_reason == "time_budget" for _, d in outcomes)
    if solved and len(outcomes) < cfg.restarts:
        logger.debug("stopped after restart {} of {} with a successful candidate", len(outcomes), cfg.restarts)

    decision = DecisionVector(best.knots)
    trace = assemble_trajectory(decision, spec)
    rho = robustness(problem.formula, trace, 0)
    feasibility = tuple(check_feasibility(seg, spec.bounds) for segments in plan_segments(decision, spec) for seg in segments)
    feasible = all(report.feasible for report in feasibility)
    status = _classify(rho, feasible, spec.epsilon, budget_exhausted)
    diagnostics = SolverDiagnostics(
        restarts=tuple(d for _, d in outcomes),
        best_restart=best_restart,
        wall_time_s=time.monotonic() - started,
        budget_exhausted=budget_exhausted,
    )
    logger.info("plan status {} with rho={:.6f} from restart {}", status.value, rho, best_restart)
    return PlanResult(
        status=status,
        trace=trace,
        robustness=rho,
        smooth_robustness=smooth_robustness(problem.formula, trace, 0, cfg.temperature),
        feasibility=feasibility,
        decision=decision,
        diagnostics=diagnostics,
    )


class ValidationReport(BaseModel):
    """
    Exact re-evaluation of a trajectory.

    :ivar robustness: Exact robustness at time 0.
    :ivar smooth_robustness: Smooth robustness at the reporting temperature.
    :ivar smoothing_gap_bound: Upper bound on ``|smooth_robustness - robustness|``.
    :ivar satisfied: Boolean satisfaction at time 0.
    :ivar segments: Kinematic report per agent and segment, agent-major.
    :ivar feasible: Whether every segment respects the bounds.
    :ivar min_separation: Smallest pairwise distance over the samples, ``None`` for one agent.
    :ivar status: Status implied by the recomputed facts.
    :ivar consistent: Whether a stored status agrees with ``status``.
    """

    model_config = ConfigDict(frozen=True)

    robustness: float
    smooth_robustness: float
    smoothing_gap_bound: float
    epsilon: float
    satisfied: bool
    segments: tuple[FeasibilityReport, ...]
    feasible: bool
    min_separation: float | None
    status: PlanStatus
    consistent: bool


def _sampled_feasibility(trace: Trace, spec: MissionSpec) -> tuple[FeasibilityReport, ...]:
    """Segment reports from the samples of each segment (when the knots are not known)."""
    starts = _segment_starts(spec)
    reports = []
    for a in range(len(spec.agents)):
        for m in range(spec.knots):
            first, last = starts[m], min(starts[m + 1], spec.n_steps)
            vpeak = np.abs(trace.velocities[first : last + 1, a]).max(axis=0)
            apeak = np.abs(trace.accelerations[first : last + 1, a]).max(axis=0)
            vmargin, amargin = spec.bounds.vmax - vpeak, spec.bounds.amax - apeak
            reports.append(
                FeasibilityReport(
                    max_velocity=tuple(vpeak),
                    max_acceleration=tuple(apeak),
                    velocity_margin=tuple(vmargin),
                    acceleration_margin=tuple(amargin),
                    feasible=bool(np.all(vmargin >= 0) and np.all(amargin >= 0)),
                )
            )
    return tuple(reports)


def validate_trace(
    trace: Trace,
    spec: MissionSpec,
    decision: DecisionVector | None = None,
    stored_status: PlanStatus | None = None,
    budget_exhausted: bool = False,
) -> ValidationReport:
    """
    Recompute the facts a plan status rests on with exact semantics.

    Kinematic margins are exact when ``decision`` is given and sample-based otherwise.

    :raises StlFleetDimensionMismatchException: If the trace does not match the mission.
    """
    if trace.agents != spec.agent_names or trace.n_samples != spec.n_steps + 1:
        raise StlFleetDimensionMismatchException(
            f"trace of {trace.n_samples} samples for {trace.agents} does not match the mission "
            f"({spec.n_steps + 1} samples for {spec.agent_names})"
        )
    if abs(trace.ts - spec.ts) > SNAP_TOLERANCE * spec.ts:
        raise StlFleetDimensionMismatchException(f"trace period {trace.ts} differs from Ts={spec.ts}")
    formula = spec.bound_formula
    if decision is None:
        segments = _sampled_feasibility(trace, spec)
    else:
        segments = tuple(
            check_feasibility(seg, spec.bounds) for agent in plan_segments(decision, spec) for seg in agent
        )
    rho = robustness(formula, trace, 0)
    feasible = all(report.feasible for report in segments)
    status = _classify(rho, feasible, spec.epsilon, budget_exhausted)
    return ValidationReport(
        robustness=rho,
        smooth_robustness=smooth_robustness(formula, trace, 0, spec.solver.temperature),
        smoothing_gap_bound=smoothing_gap_bound(formula, spec.ts, spec.solver.temperature),
        epsilon=spec.epsilon,
        satisfied=boolean_satisfaction(formula, trace, 0),
        segments=segments,
        feasible=feasible,
        min_separation=trace.min_separation(),
        status=status,
        consistent=stored_status is None or stored_status == status,
    )


def validate_plan(r: PlanResult, spec: MissionSpec) -> ValidationReport:
    """
    Re-validate a plan with exact semantics.

    :param r: The plan.
    :param spec: The mission it was planned for.
    :return: The report; ``consistent`` tells whether ``r.status`` matches the recomputed facts.
    :raises StlFleetDimensionMismatchException: If the plan does not match the mission.
    """
    return validate_trace(r.trace, spec, r.decision, r.status, r.diagnostics.budget_exhausted)
