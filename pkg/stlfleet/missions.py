"""
Benchmark mission builders.

Builders return unbound formulas: regions are referred to by name (``ws`` for the
workspace, goal and obstacle keys, ``pole1`` to ``pole4``) and resolved against an
:class:`Environment` by :meth:`stlfleet.planner.MissionSpec.bound_formula`.
"""
from collections.abc import Mapping, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from stlfleet.exceptions import StlFleetBadParamException, StlFleetInvalidSpecException, StlFleetUnknownNameException
from stlfleet.stl.formula import (
    Box,
    Formula,
    always,
    conjunction,
    eventually,
    inside,
    outside,
    separation,
    until,
)
from stlfleet.validators import validate_even_fleet, validate_unique_names

WORKSPACE = "ws"
POLES = ("pole1", "pole2", "pole3", "pole4")


class Environment(BaseModel):
    """
    Named regions of a mission.

    :ivar workspace: The flight volume, addressed as ``ws``.
    :ivar goals: Goal regions by name.
    :ivar obstacles: Obstacle regions by name.
    :ivar poles: Either no pole or exactly four inspection volumes, ``pole1`` to ``pole4``.
    :ivar delta_min: Minimum pairwise agent distance, meters.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    workspace: Box
    goals: dict[str, Box] = {}
    obstacles: dict[str, Box] = {}
    poles: tuple[Box, ...] = ()
    delta_min: float

    @model_validator(mode="after")
    def _check_regions(self) -> "Environment":
        if not self.delta_min > 0:
            raise StlFleetInvalidSpecException(f"delta_min must be > 0, got {self.delta_min}")
        if len(self.poles) not in (0, len(POLES)):
            raise StlFleetInvalidSpecException(f"expected 0 or {len(POLES)} poles, got {len(self.poles)}")
        names = [*self.goals, *self.obstacles]
        try:
            validate_unique_names(names, "region")
        except StlFleetBadParamException as exc:
            raise StlFleetInvalidSpecException(str(exc)) from None
        reserved = {WORKSPACE, *POLES}.intersection(names)
        if reserved:
            raise StlFleetInvalidSpecException(f"region names {sorted(reserved)} are reserved")
        for name, box in [*self.goals.items(), *zip(POLES, self.poles)]:
            if not box.intersects(self.workspace):
                raise StlFleetInvalidSpecException(f"region '{name}' does not intersect the workspace")
        return self

    def regions(self) -> dict[str, Box]:
        """Every addressable region by name."""
        return {WORKSPACE: self.workspace, **self.goals, **self.obstacles, **dict(zip(POLES, self.poles))}


def pairwise_safety(agents: Sequence[str], delta_min: float, T: float) -> Formula:
    """
    ``G[0,T] sep(i, j) >= delta_min`` for every unordered pair ``i < j``.

    :param agents: Agent names.
    :param delta_min: Minimum distance, meters.
    :param T: Mission duration, seconds.
    :return: The conjunction of the pair terms; ``True`` for a single agent.
    :raises StlFleetBadParamException: If an agent name appears twice.
    """
    names = validate_unique_names(agents)
    return conjunction(
        [
            always(0.0, T, separation(first, second, delta_min))
            for i, first in enumerate(names)
            for second in names[i + 1 :]
        ]
    )


def reach_avoid(env: Environment, assignments: Mapping[str, str], T: float) -> Formula:
    """
    Multi-agent reach-and-avoid mission.

    Every agent eventually enters its goal, always stays in the workspace and always
    stays out of every obstacle, and all pairs keep ``env.delta_min`` apart.

    :param env: The environment.
    :param assignments: Agent name to goal name, in fleet order.
    :param T: Mission duration, seconds.
    :return: The mission formula.
    :raises StlFleetUnknownNameException: If an assigned goal is not in ``env.goals``.
    """
    terms = []
    for agent, goal in assignments.items():
        if goal not in env.goals:
            raise StlFleetUnknownNameException(goal, "goal")
        terms.append(
            conjunction(
                [
                    eventually(0.0, T, inside(agent, goal)),
                    always(0.0, T, inside(agent, WORKSPACE)),
                    *(always(0.0, T, outside(agent, obstacle)) for obstacle in env.obstacles),
                ]
            )
        )
    return conjunction([*terms, pairwise_safety(list(assignments), env.delta_min, T)])


def powerline_inspection(env: Environment, agents: Sequence[str], T: float) -> Formula:
    """
    Two-group power-line inspection.

    The first half of the fleet visits poles 1 and 4 within ``T/2`` of a common
    instant; the second half keeps inside poles 2 and 3 until it is inside poles 3
    and 2, within ``T/2``. That instant lies in ``[0, T]``. Every agent stays in the
    workspace and apart from every other agent over ``[0, T]``.

    The horizon of the result is ``1.5 T``.

    :param env: The environment; must define four poles.
    :param agents: Agent names, an even number of them.
    :param T: Mission duration, seconds.
    :return: The mission formula.
    :raises StlFleetBadParamException: If the fleet size is odd or the poles are missing.
    """
    count = validate_even_fleet(agents)
    names = validate_unique_names(agents)
    if len(env.poles) != len(POLES):
        raise StlFleetBadParamException("powerline inspection needs four poles")
    pole1, pole2, pole3, pole4 = POLES
    first_group, second_group = names[: count // 2], names[count // 2 :]

    safety = [
        always(
            0.0,
            T,
            conjunction(
                [*(separation(agent, other, env.delta_min) for other in names[k + 1 :]), inside(agent, WORKSPACE)]
            ),
        )
        for k, agent in enumerate(names)
    ]
    visits = [
        term
        for agent in first_group
        for term in (eventually(0.0, T / 2, inside(agent, pole1)), eventually(0.0, T / 2, inside(agent, pole4)))
    ]
    hold = conjunction([term for agent in second_group for term in (inside(agent, pole2), inside(agent, pole3))])
    reach = conjunction([term for agent in second_group for term in (inside(agent, pole3), inside(agent, pole2))])
    mission = eventually(0.0, T, conjunction([*visits, until(0.0, T / 2, hold, reach)]))
    return conjunction([*safety, mission])
