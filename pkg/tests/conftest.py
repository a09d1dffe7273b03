"""Shared fixtures: random formulas and traces, a naive semantics oracle, small missions."""
import math

import numpy as np
import pytest

from stlfleet.missions import Environment, powerline_inspection
from stlfleet.planner import AgentSpec, MissionSpec, PlannerConfig
from stlfleet.primitives import KinematicBounds, KnotState
from stlfleet.robustness import TRUE_ROBUSTNESS
from stlfleet.stl.formula import (
    Always,
    And,
    Box,
    Eventually,
    Implies,
    Interval,
    Not,
    Or,
    Pred,
    TrueFormula,
    Until,
    always,
    bind_regions,
    halfspace,
    inside,
    outside,
    predicate_values,
    separation,
)
from stlfleet.trajectory import Trace

AGENTS = ("d1", "d2")
REGIONS = {
    "goal": Box(lo=(0.5, 0.5, 0.0), hi=(2.0, 2.0, 1.5)),
    "obs": Box(lo=(-1.0, -0.5, -1.0), hi=(0.0, 1.0, 2.0)),
}


def random_predicate(rng: np.random.Generator, smooth_only: bool = False) -> Pred:
    """A random predicate over ``AGENTS``; ``smooth_only`` excludes box predicates."""
    kinds = ["halfspace", "separation"] if smooth_only else ["halfspace", "separation", "inside", "outside"]
    kind = kinds[rng.integers(len(kinds))]
    agent = AGENTS[rng.integers(2)]
    if kind == "halfspace":
        return halfspace(agent, tuple(float(c) for c in rng.normal(size=3)), float(rng.normal()))
    if kind == "separation":
        return separation("d1", "d2", float(rng.uniform(0.1, 2.0)))
    region = ("goal", "obs")[rng.integers(2)]
    return inside(agent, region) if kind == "inside" else outside(agent, region)


def random_formula(
    rng: np.random.Generator,
    depth: int,
    ts: float = 0.1,
    max_window: int = 4,
    smooth_only: bool = False,
    allow_true: bool = True,
):
    """
    A random formula of at most ``depth`` operator levels.

    Interval bounds are whole multiples of ``ts`` up to ``max_window`` samples.
    """
    if depth == 0 or rng.random() < 0.2:
        if allow_true and rng.random() < 0.05:
            return TrueFormula()
        return random_predicate(rng, smooth_only)

    def child():
        return random_formula(rng, depth - 1, ts, max_window, smooth_only, allow_true)

    def window():
        lo = int(rng.integers(0, max_window))
        hi = int(rng.integers(lo, max_window + 1))
        return Interval(lo=lo * ts, hi=hi * ts)

    op = rng.integers(7)
    if op == 0:
        return Not(child=child())
    if op == 1:
        return And(children=tuple(child() for _ in range(int(rng.integers(2, 4)))))
    if op == 2:
        return Or(children=tuple(child() for _ in range(int(rng.integers(2, 4)))))
    if op == 3:
        return Implies(premise=child(), conclusion=child())
    if op == 4:
        return Always(interval=window(), child=child())
    if op == 5:
        return Eventually(interval=window(), child=child())
    return Until(interval=window(), left=child(), right=child())


def random_trace(rng: np.random.Generator, n_samples: int, ts: float = 0.1) -> Trace:
    """A random two-agent trace with positions in ``[-2, 3]^3``."""
    return Trace.from_positions(ts, AGENTS, rng.uniform(-2.0, 3.0, size=(n_samples, 2, 3)))


def bound(f):
    """``f`` with the test regions attached."""
    return bind_regions(f, REGIONS)


def naive_robustness(f, tr: Trace, i: int) -> float:
    """Robustness by literal enumeration of the quantitative semantics."""
    ts = tr.ts

    def window(iv):
        return range(i + math.ceil(round(iv.lo / ts, 9)), i + math.floor(round(iv.hi / ts, 9)) + 1)

    if isinstance(f, TrueFormula):
        return TRUE_ROBUSTNESS
    if isinstance(f, Pred):
        return float(predicate_values(f.predicate, tr.positions, tr.agent_index)[i])
    if isinstance(f, Not):
        return -naive_robustness(f.child, tr, i)
    if isinstance(f, And):
        return min(naive_robustness(c, tr, i) for c in f.children)
    if isinstance(f, Or):
        return max(naive_robustness(c, tr, i) for c in f.children)
    if isinstance(f, Implies):
        return max(-naive_robustness(f.premise, tr, i), naive_robustness(f.conclusion, tr, i))
    if isinstance(f, Always):
        return min(naive_robustness(f.child, tr, j) for j in window(f.interval))
    if isinstance(f, Eventually):
        return max(naive_robustness(f.child, tr, j) for j in window(f.interval))
    return max(
        min(naive_robustness(f.right, tr, j), min(naive_robustness(f.left, tr, l) for l in range(i, j + 1)))
        for j in window(f.interval)
    )


@pytest.fixture
def rng():
    """A seeded generator."""
    return np.random.default_rng(20240611)


@pytest.fixture
def workspace_env():
    """A 10 m cube workspace centred on the origin with one goal and one obstacle."""
    return Environment(
        workspace=Box(lo=(-5.0, -5.0, -5.0), hi=(5.0, 5.0, 5.0)),
        goals={"goal": Box(lo=(4.5, 4.5, 1.5), hi=(5.0, 5.0, 2.5))},
        obstacles={"obs": Box(lo=(-4.0, -4.0, -4.0), hi=(-3.0, -3.0, -3.0))},
        delta_min=0.5,
    )


def make_spec(env, formula, agents=None, T=2.0, ts=0.1, knots=2, vmax=3.0, amax=5.0, **solver):
    """A mission over ``env``; ``agents`` maps names to start positions."""
    agents = agents or {"d1": (0.0, 0.0, 0.0)}
    return MissionSpec(
        environment=env,
        agents=tuple(AgentSpec(name=name, x0=KnotState.hover(p)) for name, p in agents.items()),
        formula=formula,
        T=T,
        ts=ts,
        knots=knots,
        bounds=KinematicBounds(vmax=vmax, amax=amax),
        solver=PlannerConfig(**solver),
    )


@pytest.fixture
def hover_spec(workspace_env):
    """One agent at the origin that must stay in the workspace."""
    return make_spec(workspace_env, always(0.0, 2.0, inside("d1", "ws")), restarts=1, max_iterations=4)


POWERLINE_AGENTS = {
    "d1": (-1.5, -3.5, 0.75),
    "d2": (-1.5, -3.5, 2.25),
    "d3": (0.0, -0.9, 0.75),
    "d4": (0.0, -0.9, 2.25),
}


def make_powerline_spec(**solver):
    """
    Four drones inspecting four poles over T = 12 s with six knots each.

    Poles 2 and 3 overlap in ``[-0.5, 0.5] x [-0.5, 0.5] x [0, 3]``. The rest-to-rest
    route through each agent's poles satisfies the mission with robustness 0.2, set by
    the second group's margin to pole 3 at t = 8 s.
    """
    env = Environment(
        workspace=Box(lo=(-5.0, -5.0, 0.0), hi=(5.0, 5.0, 4.0)),
        poles=(
            Box(lo=(-2.0, 2.0, 0.0), hi=(-1.0, 3.0, 3.0)),
            Box(lo=(-0.5, -1.0, 0.0), hi=(0.5, 0.5, 3.0)),
            Box(lo=(-0.5, -0.5, 0.0), hi=(0.5, 1.0, 3.0)),
            Box(lo=(1.0, 2.0, 0.0), hi=(2.0, 3.0, 3.0)),
        ),
        delta_min=0.5,
    )
    formula = powerline_inspection(env, list(POWERLINE_AGENTS), 8.0)
    return make_spec(env, formula, agents=POWERLINE_AGENTS, T=12.0, knots=6, **solver)


@pytest.fixture
def powerline_spec():
    return make_powerline_spec(restarts=1, max_iterations=4)
