import math

import numpy as np
import pytest
from conftest import make_spec

from stlfleet.exceptions import (
    StlFleetBadParamException,
    StlFleetDimensionMismatchException,
    StlFleetEmptyWindowException,
    StlFleetHorizonException,
    StlFleetInvalidSpecException,
    StlFleetUnknownNameException,
)
from stlfleet.missions import pairwise_safety
from stlfleet.planner import (
    DecisionVector,
    PlannerConfig,
    PlanStatus,
    agent_targets,
    assemble_trajectory,
    initial_guess,
    objective,
    plan,
    plan_segments,
    validate_plan,
    validate_trace,
)
from stlfleet.robustness import smooth_robustness
from stlfleet.stl import (
    Box,
    Implies,
    Not,
    always,
    conjunction,
    eventually,
    halfspace,
    inside,
    parse_formula,
    separation,
)

TWO_AGENTS = {"d1": (0.0, 0.0, 0.0), "d2": (2.0, 0.0, 1.0)}


def _random_decision(rng, spec, scale=1.0):
    return DecisionVector(rng.normal(scale=scale, size=(len(spec.agents), spec.knots, 3, 3)))


@pytest.fixture
def free_spec(workspace_env):
    """Two agents, three knots, a formula that every trace can be evaluated on."""
    return make_spec(workspace_env, always(0.0, 2.0, separation("d1", "d2", 0.5)), agents=TWO_AGENTS, knots=3)


@pytest.mark.parametrize(
    "kwargs, error",
    [
        ({"T": 2.05}, StlFleetInvalidSpecException),
        ({"T": -1.0}, StlFleetInvalidSpecException),
        ({"ts": 0.0}, StlFleetInvalidSpecException),
        ({"knots": 0}, StlFleetInvalidSpecException),
        ({"T": 1.0}, StlFleetHorizonException),
    ],
)
def test_mission_spec_invariants(workspace_env, kwargs, error):
    with pytest.raises(error):
        make_spec(workspace_env, always(0.0, 2.0, inside("d1", "ws")), **kwargs)


def test_mission_spec_names(workspace_env):
    with pytest.raises(StlFleetUnknownNameException) as info:
        make_spec(workspace_env, always(0.0, 2.0, inside("d1", "gate")))
    assert info.value.name == "gate"
    with pytest.raises(StlFleetUnknownNameException) as info:
        make_spec(workspace_env, always(0.0, 2.0, inside("d7", "ws")))
    assert info.value.name == "d7"


def test_mission_spec_empty_window(workspace_env):
    with pytest.raises(StlFleetEmptyWindowException):
        make_spec(workspace_env, eventually(0.01, 0.05, inside("d1", "ws")))


def test_mission_spec_properties(free_spec):
    assert free_spec.agent_names == ("d1", "d2")
    assert free_spec.n_steps == 20
    assert free_spec.segment_duration == pytest.approx(2.0 / 3.0)
    assert free_spec.bound_formula.child.predicate.delta_min == 0.5
    assert free_spec.initial_states.shape == (2, 3, 3)


def test_solver_config_validation():
    with pytest.raises(StlFleetBadParamException):
        PlannerConfig(temperature=0.0)
    with pytest.raises(StlFleetBadParamException):
        PlannerConfig(temperature_schedule=(10.0, -1.0))
    with pytest.raises(Exception):
        PlannerConfig(restarts=0)


def test_decision_vector_shapes(free_spec):
    q = DecisionVector(np.zeros((2, 3, 3, 3)))
    assert q.flat.shape == (54,)
    assert DecisionVector.from_flat(q.flat, 2, 3).knots.shape == (2, 3, 3, 3)
    with pytest.raises(StlFleetDimensionMismatchException):
        DecisionVector.from_flat(np.zeros(53), 2, 3)
    with pytest.raises(StlFleetDimensionMismatchException):
        assemble_trajectory(DecisionVector(np.zeros((2, 2, 3, 3))), free_spec)
    with pytest.raises(StlFleetDimensionMismatchException):
        DecisionVector(np.zeros((2, 3, 3)))


def test_single_knot_hover(workspace_env):
    spec = make_spec(workspace_env, always(0.0, 2.0, inside("d1", "ws")), agents={"d1": (1.0, -2.0, 0.5)}, knots=1)
    q = DecisionVector(spec.initial_states[:, None])
    trace = assemble_trajectory(q, spec)
    assert trace.n_samples == 21
    np.testing.assert_array_equal(trace.positions, np.broadcast_to((1.0, -2.0, 0.5), (21, 1, 3)))
    np.testing.assert_array_equal(trace.velocities, 0.0)


def test_first_sample_is_pinned(rng, free_spec):
    trace = assemble_trajectory(_random_decision(rng, free_spec), free_spec)
    np.testing.assert_allclose(trace.positions[0], [TWO_AGENTS["d1"], TWO_AGENTS["d2"]], atol=1e-12)
    np.testing.assert_allclose(trace.velocities[0], 0.0, atol=1e-12)


def test_continuity_at_knots(rng, free_spec):
    for _ in range(10):
        segments = plan_segments(_random_decision(rng, free_spec), free_spec)
        for agent in segments:
            for before, after in zip(agent, agent[1:]):
                np.testing.assert_allclose(
                    before.state(before.duration).as_array(), after.state(0.0).as_array(), atol=1e-9
                )


def test_trace_is_linear_in_boundary_states(rng, free_spec):
    mapping = free_spec.trajectory_map
    s1, s2 = rng.normal(size=(2, 2, 4, 3, 3))
    combined = mapping.apply(s1 + 2.0 * s2)
    for output, first, second in zip(combined, mapping.apply(s1), mapping.apply(s2)):
        np.testing.assert_allclose(output, first + 2.0 * second, atol=1e-12)


def test_map_matches_assembly(rng, workspace_env):
    for T, knots in ((2.0, 3), (1.0, 4), (3.0, 7)):
        spec = make_spec(workspace_env, always(0.0, 1.0, inside("d1", "ws")), agents=TWO_AGENTS, T=T, knots=knots)
        for _ in range(3):
            q = _random_decision(rng, spec)
            trace = assemble_trajectory(q, spec)
            states = np.concatenate([spec.initial_states[:, None], q.knots], axis=1)
            for mapped, literal in zip(
                spec.trajectory_map.apply(states), (trace.positions, trace.velocities, trace.accelerations)
            ):
                np.testing.assert_allclose(mapped, literal, atol=1e-9)


def test_objective_at_hover(hover_spec):
    value, gradient = objective(initial_guess(hover_spec), hover_spec)
    n = hover_spec.n_steps
    assert 5.0 - math.log((n + 1) * hover_spec.knots) / 25.0 <= value <= 5.0
    assert value == pytest.approx(5.0 - math.log(n + 1) / 25.0)
    assert gradient.shape == (1, hover_spec.knots, 3, 3)


def test_objective_without_penalty_is_smooth_robustness(rng, free_spec):
    q = _random_decision(rng, free_spec, scale=3.0)
    value, _ = objective(q, free_spec, k=25.0, penalty_weight=0.0)
    expected = smooth_robustness(free_spec.bound_formula, assemble_trajectory(q, free_spec), 0, 25.0)
    assert value == pytest.approx(expected, abs=1e-9)


def test_objective_penalises_infeasible_knots(free_spec):
    q = DecisionVector(np.concatenate([np.full((2, 3, 1, 3), 50.0), np.zeros((2, 3, 2, 3))], axis=2))
    weighted, _ = objective(q, free_spec, penalty_weight=100.0)
    free, _ = objective(q, free_spec, penalty_weight=0.0)
    assert weighted < free


def test_objective_gradient_matches_finite_differences(rng, workspace_env):
    formula = conjunction(
        [
            eventually(0.0, 1.0, halfspace("d1", (1.0, 0.0, 0.0), -0.5)),
            always(0.0, 2.0, separation("d1", "d2", 0.5)),
            always(0.5, 1.5, halfspace("d2", (0.0, 1.0, -1.0), 0.2)),
        ]
    )
    spec = make_spec(workspace_env, formula, agents=TWO_AGENTS, knots=3, vmax=1e3, amax=1e4)
    q = DecisionVector(initial_guess(spec).knots + rng.normal(scale=0.3, size=(2, 3, 3, 3)))
    _, gradient = objective(q, spec)
    h = 1e-6
    for index in np.ndindex(q.knots.shape):
        values = []
        for step in (h, -h):
            knots = np.array(q.knots)
            knots[index] += step
            values.append(objective(DecisionVector(knots), spec)[0])
        fd = (values[0] - values[1]) / (2 * h)
        assert gradient[index] == pytest.approx(fd, rel=1e-3, abs=1e-5)


def test_objective_gradient_includes_penalty(workspace_env):
    spec = make_spec(workspace_env, always(0.0, 2.0, inside("d1", "ws")), knots=2, vmax=1.0, amax=2.0)
    knots = np.zeros((1, 2, 3, 3))
    knots[0, 0, 0] = (1.5, 0.0, 0.0)
    q = DecisionVector(knots)
    value, gradient = objective(q, spec, penalty_weight=10.0)
    h = 1e-5
    shifted = np.array(knots)
    shifted[0, 0, 0, 0] += h
    forward = objective(DecisionVector(shifted), spec, penalty_weight=10.0)[0]
    shifted[0, 0, 0, 0] -= 2 * h
    backward = objective(DecisionVector(shifted), spec, penalty_weight=10.0)[0]
    assert gradient[0, 0, 0, 0] == pytest.approx((forward - backward) / (2 * h), rel=1e-3, abs=1e-4)
    assert gradient[0, 0, 0, 0] < 0


def test_initial_guess_heads_to_goal(workspace_env):
    spec = make_spec(
        workspace_env,
        conjunction([eventually(0.0, 2.0, inside("d1", "goal")), always(0.0, 2.0, inside("d1", "ws"))]),
        knots=2,
    )
    q = initial_guess(spec)
    np.testing.assert_allclose(q.knots[0, -1, 0], (4.75, 4.75, 2.0))
    np.testing.assert_allclose(q.knots[0, 0, 0], (2.375, 2.375, 1.0))
    np.testing.assert_array_equal(q.knots[0, :, 1:], 0.0)


def test_agent_targets_follow_formula_order(powerline_spec):
    pole1, _, _, pole4 = powerline_spec.environment.poles
    assert agent_targets(powerline_spec, "d1") == [pole1, pole4]
    assert agent_targets(powerline_spec, "d2") == [pole1, pole4]
    overlap = Box(lo=(-0.5, -0.5, 0.0), hi=(0.5, 0.5, 3.0))
    assert agent_targets(powerline_spec, "d3") == [overlap]
    assert agent_targets(powerline_spec, "d4") == [overlap]


def test_agent_targets_skip_negations_and_premises(workspace_env):
    formula = conjunction(
        [
            always(0.0, 2.0, Not(child=inside("d1", "obs"))),
            eventually(0.0, 2.0, Implies(premise=inside("d1", "obs"), conclusion=inside("d1", "goal"))),
            eventually(0.0, 2.0, inside("d1", "goal")),
            always(0.0, 2.0, inside("d1", "ws")),
        ]
    )
    spec = make_spec(workspace_env, formula)
    assert agent_targets(spec, "d1") == [workspace_env.goals["goal"]]


def test_initial_guess_routes_through_targets(powerline_spec):
    knots = initial_guess(powerline_spec).knots
    # group one reaches pole 1 at t = 8 s and pole 4 at t = 12 s, stacked in z
    np.testing.assert_allclose(knots[0, 3, 0], (-1.5, 2.5, 0.75), atol=1e-12)
    np.testing.assert_allclose(knots[0, -1, 0], (1.5, 2.5, 0.75), atol=1e-12)
    np.testing.assert_allclose(knots[1, 3, 0], (-1.5, 2.5, 2.25), atol=1e-12)
    np.testing.assert_allclose(knots[1, -1, 0], (1.5, 2.5, 2.25), atol=1e-12)
    np.testing.assert_allclose(knots[2, -1, 0], (0.0, 0.0, 0.75), atol=1e-12)
    np.testing.assert_allclose(knots[3, -1, 0], (0.0, 0.0, 2.25), atol=1e-12)
    np.testing.assert_array_equal(knots[:, :, 1:], 0.0)

    report = validate_trace(assemble_trajectory(DecisionVector(knots), powerline_spec), powerline_spec)
    assert report.robustness == pytest.approx(0.2, abs=1e-9)
    assert report.feasible
    assert report.status == PlanStatus.SUCCESS


def test_plan_hover_succeeds(hover_spec):
    result = plan(hover_spec)
    assert result.status == PlanStatus.SUCCESS
    assert result.robustness >= hover_spec.epsilon
    assert result.feasible
    assert result.trace.n_samples == hover_spec.n_steps + 1
    report = validate_plan(result, hover_spec)
    assert report.consistent
    assert report.satisfied
    assert report.robustness == result.robustness
    assert report.min_separation is None


def test_plan_unsatisfiable_mission(workspace_env):
    # at most 3 m of travel in 1 s under vmax = 3, the goal is 4.5 m away on every axis
    formula = conjunction([eventually(0.0, 1.0, inside("d1", "goal")), always(0.0, 1.0, inside("d1", "ws"))])
    spec = make_spec(workspace_env, formula, T=1.0, restarts=2, max_iterations=6)
    result = plan(spec)
    assert result.status != PlanStatus.SUCCESS
    report = validate_plan(result, spec)
    assert report.consistent
    assert report.status == result.status


def test_plan_is_deterministic(free_spec):
    cfg = PlannerConfig(restarts=3, max_iterations=6, seed=7)
    first, second = plan(free_spec, cfg), plan(free_spec, cfg)
    np.testing.assert_array_equal(first.trace.positions, second.trace.positions)
    assert first.robustness == second.robustness
    assert first.diagnostics.best_restart == second.diagnostics.best_restart


def test_plan_does_not_depend_on_workers(free_spec):
    serial = plan(free_spec, PlannerConfig(restarts=3, max_iterations=6, seed=3))
    threaded = plan(free_spec, PlannerConfig(restarts=3, max_iterations=6, seed=3, workers=3))
    np.testing.assert_array_equal(serial.decision.knots, threaded.decision.knots)
    assert [r.history for r in serial.diagnostics.restarts] == [r.history for r in threaded.diagnostics.restarts]


@pytest.mark.parametrize("workers", [1, 3])
def test_plan_stops_after_successful_restart(hover_spec, workers):
    result = plan(hover_spec, PlannerConfig(restarts=3, max_iterations=4, workers=workers))
    assert result.status == PlanStatus.SUCCESS
    assert [r.restart for r in result.diagnostics.restarts] == [0]
    assert not result.diagnostics.budget_exhausted

    every = plan(hover_spec, PlannerConfig(restarts=3, max_iterations=4, workers=workers, stop_on_success=False))
    assert [r.restart for r in every.diagnostics.restarts] == [0, 1, 2]


def test_plan_stops_at_deadline(workspace_env):
    formula = conjunction([eventually(0.0, 1.0, inside("d1", "goal")), always(0.0, 1.0, inside("d1", "ws"))])
    spec = make_spec(workspace_env, formula, T=1.0, restarts=3, max_iterations=50, time_budget_s=1e-6)
    result = plan(spec)
    assert result.status == PlanStatus.BUDGET_EXHAUSTED
    assert result.diagnostics.budget_exhausted
    # later restarts are skipped once the deadline has passed
    [restart] = result.diagnostics.restarts
    assert restart.stop_reason == "time_budget"
    assert restart.iterations == 0
    assert validate_plan(result, spec).consistent


def test_accepted_objective_is_nondecreasing(free_spec):
    result = plan(free_spec, PlannerConfig(restarts=2, max_iterations=10, temperature_schedule=(5.0, 25.0)))
    for restart in result.diagnostics.restarts:
        assert len(restart.history) <= 2
        for phase in restart.history:
            assert all(b >= a for a, b in zip(phase, phase[1:]))
    assert result.diagnostics.iterations == sum(r.iterations for r in result.diagnostics.restarts)


def test_plan_keeps_initial_state(free_spec):
    result = plan(free_spec, PlannerConfig(restarts=2, max_iterations=4))
    np.testing.assert_allclose(result.trace.positions[0], [TWO_AGENTS["d1"], TWO_AGENTS["d2"]], atol=1e-12)


def test_validate_colocated_agents(workspace_env):
    spec = make_spec(
        workspace_env, pairwise_safety(["d1", "d2"], 0.5, 2.0), agents={"d1": (1.0, 1.0, 1.0), "d2": (1.0, 1.0, 1.0)}
    )
    trace = assemble_trajectory(initial_guess(spec), spec)
    report = validate_trace(trace, spec)
    assert report.robustness == -0.5
    assert not report.satisfied
    assert report.min_separation == 0.0
    assert report.feasible
    assert report.status == PlanStatus.ROBUSTNESS_BELOW_EPSILON
    assert report.smoothing_gap_bound == pytest.approx(math.log(21) / 25.0)


def test_validate_flags_inconsistent_status(hover_spec):
    trace = assemble_trajectory(initial_guess(hover_spec), hover_spec)
    report = validate_trace(trace, hover_spec, stored_status=PlanStatus.INFEASIBLE)
    assert report.status == PlanStatus.SUCCESS
    assert not report.consistent


def test_validate_rejects_mismatched_trace(hover_spec, free_spec):
    trace = assemble_trajectory(initial_guess(free_spec), free_spec)
    with pytest.raises(StlFleetDimensionMismatchException):
        validate_trace(trace, hover_spec)


def test_parsed_formula_plans(workspace_env):
    spec = make_spec(workspace_env, parse_formula("G[0,2] 1*d1.pz >= -1"), restarts=1, max_iterations=2)
    assert plan(spec).status == PlanStatus.SUCCESS
