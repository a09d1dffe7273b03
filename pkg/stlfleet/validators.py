"""
This module provides validation functions for the values flowing through the planner.

Each validator function ensures that input values conform to the invariants the
formula, primitive and mission types rely on, and raises the matching exception of
:mod:`stlfleet.exceptions` for invalid inputs.
"""
from collections.abc import Iterable, Sequence

import numpy as np

from stlfleet.exceptions import (
    StlFleetBadParamException,
    StlFleetDegenerateDurationException,
    StlFleetIntervalException,
    StlFleetInvalidSpecException,
    StlFleetNonfiniteInputException,
)


def validate_interval(
    lo: float, hi: float, line: int | None = None, column: int | None = None
) -> tuple[float, float]:
    """
    Validate the bounds of a time interval.

    :param lo: Lower bound in seconds.
    :param hi: Upper bound in seconds.
    :param line: Optional source line of the interval, used in the error message.
    :param column: Optional source column of the interval.
    :returns: The bounds as a tuple of floats.
    :raises StlFleetIntervalException: If ``lo < 0``, ``lo > hi`` or a bound is not finite.
    """
    lo, hi = float(lo), float(hi)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise StlFleetIntervalException(f"interval [{lo}, {hi}] must be finite", line, column)
    if lo < 0:
        raise StlFleetIntervalException(f"interval [{lo}, {hi}] starts before 0", line, column)
    if lo > hi:
        raise StlFleetIntervalException(f"interval [{lo}, {hi}] has lo > hi", line, column)
    return lo, hi


def validate_box(lo: Sequence[float], hi: Sequence[float]) -> None:
    """
    Validate the corners of an axis-aligned box.

    :param lo: Lower corner (3 values, meters).
    :param hi: Upper corner (3 values, meters).
    :raises StlFleetInvalidSpecException: If a corner is not finite or ``lo >= hi`` on any axis.
    """
    lo_arr, hi_arr = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    if not (np.all(np.isfinite(lo_arr)) and np.all(np.isfinite(hi_arr))):
        raise StlFleetInvalidSpecException("box corners must be finite")
    if np.any(lo_arr >= hi_arr):
        raise StlFleetInvalidSpecException(f"box lo {tuple(lo)} must be below hi {tuple(hi)} on every axis")


def validate_finite(name: str, values: Iterable[float]) -> None:
    """
    Validate that every component of a boundary value is finite.

    :param name: Name of the value, used in the error message.
    :param values: Components to check.
    :raises StlFleetNonfiniteInputException: If any component is NaN or infinite.
    """
    if not np.all(np.isfinite(np.asarray(list(values), dtype=float))):
        raise StlFleetNonfiniteInputException(f"{name} has non-finite components")


def validate_duration(duration: float) -> float:
    """
    Validate a segment duration.

    :param duration: Duration in seconds.
    :returns: The duration as a float.
    :raises StlFleetDegenerateDurationException: If the duration is not strictly positive and finite.
    """
    duration = float(duration)
    if not np.isfinite(duration) or duration <= 0:
        raise StlFleetDegenerateDurationException(f"segment duration must be > 0, got {duration}")
    return duration


def validate_unique_names(names: Sequence[str], kind: str = "agent") -> list[str]:
    """
    Validate that a list of names holds no duplicates.

    :param names: Names to check.
    :param kind: What the names denote, used in the error message.
    :returns: The names as a list.
    :raises StlFleetBadParamException: If a name appears twice.
    """
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise StlFleetBadParamException(f"duplicate {kind} name '{name}'")
        seen.add(name)
    return list(names)


def validate_even_fleet(agents: Sequence[str]) -> int:
    """
    Validate the fleet size of a two-group mission.

    :param agents: Agent names.
    :returns: The number of agents.
    :raises StlFleetBadParamException: If the fleet is empty or its size is odd.
    """
    count = len(agents)
    if count == 0 or count % 2:
        raise StlFleetBadParamException(f"fleet size must be a positive even number, got {count}")
    return count


def validate_temperature(k: float) -> float:
    """
    Validate the temperature of the smooth max/min approximation.

    :param k: The temperature (dimensionless).
    :returns: The temperature as a float.
    :raises StlFleetBadParamException: If ``k`` is not finite and strictly positive.
    """
    k = float(k)
    if not np.isfinite(k) or k <= 0:
        raise StlFleetBadParamException(f"temperature must be finite and > 0, got {k}")
    return k
