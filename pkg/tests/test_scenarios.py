"""Desk-scale planning runs; select with ``pytest -m slow``."""
from itertools import combinations

import pytest
from conftest import POWERLINE_AGENTS, make_powerline_spec, make_spec

from stlfleet.missions import Environment, reach_avoid
from stlfleet.planner import PlanStatus, plan, validate_plan
from stlfleet.robustness import boolean_satisfaction
from stlfleet.stl import Box, always, bind_regions, conjunction, eventually, inside, separation, until

pytestmark = pytest.mark.slow

SEEDS = range(10)


def _check_sound(result, spec):
    report = validate_plan(result, spec)
    assert report.consistent
    assert result.diagnostics.wall_time_s <= spec.solver.time_budget_s
    if result.status == PlanStatus.SUCCESS:
        assert report.satisfied
        assert report.robustness >= spec.epsilon
        assert report.feasible
        if report.min_separation is not None:
            assert report.min_separation >= spec.environment.delta_min
    return report


def _with_seed(spec, seed):
    return spec.model_copy(update={"solver": spec.solver.model_copy(update={"seed": seed})})


def test_single_drone_reaches_goal():
    env = Environment(
        workspace=Box(lo=(-1.0, -1.0, -1.0), hi=(7.0, 7.0, 4.0)),
        goals={"goal": Box(lo=(4.5, 4.5, 1.5), hi=(5.5, 5.5, 2.5))},
        delta_min=0.5,
    )
    formula = conjunction([eventually(0.0, 10.0, inside("d1", "goal")), always(0.0, 10.0, inside("d1", "ws"))])
    spec = make_spec(env, formula, T=10.0, knots=5, restarts=2, max_iterations=50)
    result = plan(spec)
    assert result.status == PlanStatus.SUCCESS
    assert result.robustness >= 0.01
    _check_sound(result, spec)


def test_two_drone_crossing():
    env = Environment(
        workspace=Box(lo=(-1.0, -3.0, 0.0), hi=(5.0, 3.0, 3.0)),
        goals={
            "g1": Box(lo=(3.5, -0.5, 0.5), hi=(4.5, 0.5, 1.5)),
            "g2": Box(lo=(-0.5, -0.5, 0.5), hi=(0.5, 0.5, 1.5)),
        },
        obstacles={"wall": Box(lo=(1.5, 1.0, 0.0), hi=(2.5, 2.0, 3.0))},
        delta_min=0.5,
    )
    spec = make_spec(
        env,
        reach_avoid(env, {"d1": "g1", "d2": "g2"}, 10.0),
        agents={"d1": (0.0, 0.0, 1.0), "d2": (4.0, 0.0, 1.0)},
        T=10.0,
        knots=5,
    )
    successes = 0
    for seed in SEEDS:
        seeded = _with_seed(spec, seed)
        result = plan(seeded)
        report = _check_sound(result, seeded)
        if result.status == PlanStatus.SUCCESS:
            successes += 1
            assert report.min_separation >= 0.5
            assert all(segment.feasible for segment in report.segments)
    assert successes >= 8


def test_powerline_four_drones():
    spec = make_powerline_spec(max_iterations=100, time_budget_s=300.0)
    for seed in SEEDS:
        seeded = _with_seed(spec, seed)
        result = plan(seeded)
        _check_sound(result, seeded)
        if result.status == PlanStatus.SUCCESS:
            break
    assert result.status == PlanStatus.SUCCESS

    regions = spec.environment.regions()
    first, second = list(POWERLINE_AGENTS)[:2], list(POWERLINE_AGENTS)[2:]

    def holds(formula):
        return boolean_satisfaction(bind_regions(formula, regions), result.trace)

    visits = conjunction([eventually(0.0, 4.0, inside(a, pole)) for a in first for pole in ("pole1", "pole4")])
    assert holds(eventually(0.0, 8.0, visits))
    stay = conjunction([inside(a, pole) for a in second for pole in ("pole2", "pole3")])
    assert holds(eventually(0.0, 8.0, until(0.0, 4.0, stay, stay)))
    apart = [separation(a, b, 0.5) for a, b in combinations(POWERLINE_AGENTS, 2)]
    assert holds(always(0.0, 8.0, conjunction([*(inside(a, "ws") for a in POWERLINE_AGENTS), *apart])))
