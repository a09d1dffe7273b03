"""
STL formula AST and predicate catalog.

A formula is an immutable tree of frozen pydantic models. Predicates refer to agents
and regions by name; box predicates additionally carry the resolved :class:`Box` once
:func:`bind_regions` has been applied against a mission environment. Parsed and
built formulas are unbound, so structural equality compares names only.

Every predicate defines a real-valued margin ``mu`` over the multi-agent position
state, in meters, with the convention ``mu >= 0`` iff the predicate holds.
"""
from __future__ import annotations

from collections.abc import Iterator, Mapping, Sequence
from typing import Annotated, Literal, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stlfleet.exceptions import StlFleetFormulaException, StlFleetUnknownNameException
from stlfleet.validators import validate_box, validate_interval

Vec3 = tuple[float, float, float]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Interval(_Frozen):
    """
    Closed time interval ``[lo, hi]`` in seconds.

    ``lo == hi`` is accepted; the interval then selects a single sample.
    """

    lo: float
    hi: float

    @model_validator(mode="after")
    def _check_bounds(self) -> Interval:
        validate_interval(self.lo, self.hi)
        return self


class Box(_Frozen):
    """
    Axis-aligned box region, corners in meters.
    """

    lo: Vec3
    hi: Vec3

    @model_validator(mode="after")
    def _check_corners(self) -> Box:
        validate_box(self.lo, self.hi)
        return self

    @property
    def centroid(self) -> np.ndarray:
        """Center of the box."""
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def margin(self, positions: ArrayLike) -> np.ndarray:
        """
        Signed L-infinity distance to the box boundary, positive inside.

        :param positions: Array of shape ``(..., 3)``.
        :return: Array of shape ``(...)``.
        """
        p = np.asarray(positions, dtype=float)
        return np.minimum(p - np.asarray(self.lo), np.asarray(self.hi) - p).min(axis=-1)

    def face_margins(self, positions: ArrayLike) -> np.ndarray:
        """
        Margins to the six faces, ``(p - lo)`` for the three lower faces then ``(hi - p)``.

        :param positions: Array of shape ``(..., 3)``.
        :return: Array of shape ``(..., 6)``.
        """
        p = np.asarray(positions, dtype=float)
        return np.concatenate([p - np.asarray(self.lo), np.asarray(self.hi) - p], axis=-1)

    def intersects(self, other: Box) -> bool:
        """Whether the two closed boxes share at least one point."""
        below = np.all(np.asarray(self.lo) <= np.asarray(other.hi))
        return bool(below and np.all(np.asarray(other.lo) <= np.asarray(self.hi)))

    def intersection(self, other: Box) -> Box | None:
        """The common volume of the two boxes, ``None`` unless it has positive extent on every axis."""
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo >= hi):
            return None
        return Box(lo=tuple(lo.tolist()), hi=tuple(hi.tolist()))


class Halfspace(_Frozen):
    """Affine predicate ``a . p + b >= 0`` over one agent's position."""

    kind: Literal["halfspace"] = "halfspace"
    agent: str
    coefficients: Vec3
    offset: float


class InsideBox(_Frozen):
    """The agent lies inside the named region."""

    kind: Literal["inside"] = "inside"
    agent: str
    region: str
    box: Box | None = None


class OutsideBox(_Frozen):
    """The agent lies outside the named region."""

    kind: Literal["outside"] = "outside"
    agent: str
    region: str
    box: Box | None = None


class Separation(_Frozen):
    """Two agents are at least ``delta_min`` meters apart."""

    kind: Literal["separation"] = "separation"
    agent_i: str
    agent_j: str
    delta_min: float

    @model_validator(mode="after")
    def _check_pair(self) -> Separation:
        if self.agent_i == self.agent_j:
            raise StlFleetFormulaException(f"separation of agent '{self.agent_i}' with itself")
        if not self.delta_min > 0:
            raise StlFleetFormulaException(f"separation distance must be > 0, got {self.delta_min}")
        return self


Predicate = Annotated[Union[Halfspace, InsideBox, OutsideBox, Separation], Field(discriminator="kind")]


class TrueFormula(_Frozen):
    """Boolean true."""

    kind: Literal["true"] = "true"


class Pred(_Frozen):
    """Atomic proposition ``mu(x) >= 0``."""

    kind: Literal["pred"] = "pred"
    predicate: Predicate


class Not(_Frozen):
    """Negation."""

    kind: Literal["not"] = "not"
    child: Formula


class And(_Frozen):
    """Conjunction of one or more formulas."""

    kind: Literal["and"] = "and"
    children: tuple[Formula, ...] = Field(min_length=1)


class Or(_Frozen):
    """Disjunction of one or more formulas."""

    kind: Literal["or"] = "or"
    children: tuple[Formula, ...] = Field(min_length=1)


class Implies(_Frozen):
    """Implication, equivalent to ``!premise || conclusion``."""

    kind: Literal["implies"] = "implies"
    premise: Formula
    conclusion: Formula


class Always(_Frozen):
    """``child`` holds at every instant of the interval."""

    kind: Literal["always"] = "always"
    interval: Interval
    child: Formula


class Eventually(_Frozen):
    """``child`` holds at some instant of the interval."""

    kind: Literal["eventually"] = "eventually"
    interval: Interval
    child: Formula


class Until(_Frozen):
    """
    ``right`` holds at some instant ``j`` of the interval and ``left`` holds at every
    instant from now up to and including ``j``.
    """

    kind: Literal["until"] = "until"
    interval: Interval
    left: Formula
    right: Formula


Formula = Annotated[
    Union[TrueFormula, Pred, Not, And, Or, Implies, Always, Eventually, Until],
    Field(discriminator="kind"),
]

for _model in (Not, And, Or, Implies, Always, Eventually, Until):
    _model.model_rebuild()

BOX_PREDICATES = (InsideBox, OutsideBox)
TEMPORAL = (Always, Eventually)


# -- constructors ------------------------------------------------------------


def interval(lo: float, hi: float) -> Interval:
    """Build an :class:`Interval`."""
    return Interval(lo=lo, hi=hi)


def halfspace(agent: str, coefficients: Sequence[float], offset: float) -> Pred:
    """Atomic ``a . p(agent) + b >= 0``."""
    return Pred(predicate=Halfspace(agent=agent, coefficients=tuple(coefficients), offset=offset))


def inside(agent: str, region: str, box: Box | None = None) -> Pred:
    """Atomic ``agent in region``."""
    return Pred(predicate=InsideBox(agent=agent, region=region, box=box))


def outside(agent: str, region: str, box: Box | None = None) -> Pred:
    """Atomic ``agent out of region``."""
    return Pred(predicate=OutsideBox(agent=agent, region=region, box=box))


def separation(agent_i: str, agent_j: str, delta_min: float) -> Pred:
    """Atomic ``||p_i - p_j|| >= delta_min``."""
    return Pred(predicate=Separation(agent_i=agent_i, agent_j=agent_j, delta_min=delta_min))


def always(lo: float, hi: float, child: Formula) -> Always:
    """``G[lo, hi] child``."""
    return Always(interval=interval(lo, hi), child=child)


def eventually(lo: float, hi: float, child: Formula) -> Eventually:
    """``F[lo, hi] child``."""
    return Eventually(interval=interval(lo, hi), child=child)


def until(lo: float, hi: float, left: Formula, right: Formula) -> Until:
    """``left U[lo, hi] right``."""
    return Until(interval=interval(lo, hi), left=left, right=right)


def conjunction(items: Sequence[Formula]) -> Formula:
    """
    Conjunction of ``items`` with ``True`` operands dropped.

    An empty conjunction is ``True`` and a single operand is returned as is, so
    builders never produce one-child nodes.
    """
    kept = [item for item in items if not isinstance(item, TrueFormula)]
    if not kept:
        return TrueFormula()
    if len(kept) == 1:
        return kept[0]
    return And(children=tuple(kept))


def disjunction(items: Sequence[Formula]) -> Formula:
    """
    Disjunction of ``items``; an empty disjunction is ``!true``.
    """
    if any(isinstance(item, TrueFormula) for item in items):
        return TrueFormula()
    if not items:
        return Not(child=TrueFormula())
    if len(items) == 1:
        return items[0]
    return Or(children=tuple(items))


# -- structural queries ------------------------------------------------------


def children(f: Formula) -> tuple[Formula, ...]:
    """Direct sub-formulas of ``f`` in source order."""
    if isinstance(f, (TrueFormula, Pred)):
        return ()
    if isinstance(f, (Not, Always, Eventually)):
        return (f.child,)
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, Implies):
        return (f.premise, f.conclusion)
    return (f.left, f.right)


def iter_predicates(f: Formula) -> Iterator[Halfspace | InsideBox | OutsideBox | Separation]:
    """Yield the predicates of ``f`` depth first, left to right."""
    if isinstance(f, Pred):
        yield f.predicate
        return
    for child in children(f):
        yield from iter_predicates(child)


def predicate_agents(p: Halfspace | InsideBox | OutsideBox | Separation) -> tuple[str, ...]:
    """Agent names a predicate refers to."""
    if isinstance(p, Separation):
        return (p.agent_i, p.agent_j)
    return (p.agent,)


def formula_agents(f: Formula) -> set[str]:
    """The agent set of ``f``."""
    return {agent for p in iter_predicates(f) for agent in predicate_agents(p)}


def formula_regions(f: Formula) -> set[str]:
    """Region names referenced by box predicates of ``f``."""
    return {p.region for p in iter_predicates(f) if isinstance(p, BOX_PREDICATES)}


def horizon(f: Formula) -> float:
    """
    Latest future time, in seconds, that ``f`` refers to when evaluated at time 0.

    :param f: The formula.
    :return: The horizon in seconds.
    """
    if isinstance(f, (TrueFormula, Pred)):
        return 0.0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or, Implies)):
        return max(horizon(child) for child in children(f))
    if isinstance(f, TEMPORAL):
        return f.interval.hi + horizon(f.child)
    return f.interval.hi + max(horizon(f.left), horizon(f.right))


def bind_regions(f: Formula, regions: Mapping[str, Box]) -> Formula:
    """
    Attach the :class:`Box` of every region referenced by a box predicate.

    :param f: The formula.
    :param regions: Region name to box mapping.
    :return: A formula of the same shape whose box predicates carry their box.
    :raises StlFleetUnknownNameException: If a region name is not in ``regions``.
    """
    if isinstance(f, TrueFormula):
        return f
    if isinstance(f, Pred):
        p = f.predicate
        if isinstance(p, BOX_PREDICATES):
            if p.region not in regions:
                raise StlFleetUnknownNameException(p.region, "region")
            return Pred(predicate=p.model_copy(update={"box": regions[p.region]}))
        return f
    if isinstance(f, (Not, Always, Eventually)):
        return f.model_copy(update={"child": bind_regions(f.child, regions)})
    if isinstance(f, (And, Or)):
        return f.model_copy(update={"children": tuple(bind_regions(c, regions) for c in f.children)})
    if isinstance(f, Implies):
        return f.model_copy(
            update={"premise": bind_regions(f.premise, regions), "conclusion": bind_regions(f.conclusion, regions)}
        )
    return f.model_copy(update={"left": bind_regions(f.left, regions), "right": bind_regions(f.right, regions)})


# -- predicate evaluation ----------------------------------------------------


def _agent_index(index: Mapping[str, int], agent: str) -> int:
    try:
        return index[agent]
    except KeyError:
        raise StlFleetUnknownNameException(agent, "agent") from None


def _bound_box(p: InsideBox | OutsideBox) -> Box:
    if p.box is None:
        raise StlFleetUnknownNameException(p.region, "unbound region")
    return p.box


def predicate_values(
    p: Halfspace | InsideBox | OutsideBox | Separation,
    positions: np.ndarray,
    index: Mapping[str, int],
    eta: float = 0.0,
) -> np.ndarray:
    """
    Margin of a predicate at every sample.

    :param p: The predicate.
    :param positions: Positions of shape ``(n_samples, n_agents, 3)``.
    :param index: Agent name to column of ``positions``.
    :param eta: Regularisation of the separation norm, ``sqrt(|d|^2 + eta^2)``.
    :return: Array of shape ``(n_samples,)``.
    :raises StlFleetUnknownNameException: For an unknown agent or an unbound region.
    """
    if isinstance(p, Halfspace):
        pos = positions[:, _agent_index(index, p.agent)]
        return pos @ np.asarray(p.coefficients, dtype=float) + p.offset
    if isinstance(p, Separation):
        d = positions[:, _agent_index(index, p.agent_i)] - positions[:, _agent_index(index, p.agent_j)]
        return np.sqrt(np.sum(d * d, axis=-1) + eta * eta) - p.delta_min
    margin = _bound_box(p).margin(positions[:, _agent_index(index, p.agent)])
    return margin if isinstance(p, InsideBox) else -margin


def predicate_gradients(
    p: Halfspace | InsideBox | OutsideBox | Separation,
    positions: np.ndarray,
    index: Mapping[str, int],
    eta: float = 0.0,
) -> list[tuple[int, np.ndarray]]:
    """
    Derivative of :func:`predicate_values` with respect to the positions it reads.

    Box margins are differentiated along their active face (the first minimal one).

    :return: ``(agent column, array (n_samples, 3))`` pairs.
    """
    if isinstance(p, Halfspace):
        column = _agent_index(index, p.agent)
        grad = np.broadcast_to(np.asarray(p.coefficients, dtype=float), (positions.shape[0], 3))
        return [(column, grad)]
    if isinstance(p, Separation):
        i, j = _agent_index(index, p.agent_i), _agent_index(index, p.agent_j)
        d = positions[:, i] - positions[:, j]
        radius = np.sqrt(np.sum(d * d, axis=-1) + eta * eta)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(radius[:, None] > 0, d / radius[:, None], 0.0)
        return [(i, unit), (j, -unit)]
    column = _agent_index(index, p.agent)
    faces = _bound_box(p).face_margins(positions[:, column])
    active = np.argmin(faces, axis=-1)
    grad = np.zeros((positions.shape[0], 3))
    rows = np.arange(positions.shape[0])
    grad[rows, active % 3] = np.where(active < 3, 1.0, -1.0)
    return [(column, grad if isinstance(p, InsideBox) else -grad)]


def eval_predicate(
    p: Halfspace | InsideBox | OutsideBox | Separation, state: Mapping[str, ArrayLike]
) -> float:
    """
    Evaluate a predicate on the positions of the fleet at one instant.

    :param p: The predicate; box predicates must be bound.
    :param state: Agent name to position (3 values, meters).
    :return: The margin ``mu`` in meters, ``>= 0`` iff the predicate holds.
    :raises StlFleetUnknownNameException: If a referenced agent is missing from ``state``.
    """
    names = list(state)
    positions = np.asarray([state[name] for name in names], dtype=float).reshape(1, len(names), 3)
    return float(predicate_values(p, positions, {name: i for i, name in enumerate(names)})[0])
