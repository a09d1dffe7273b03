"""
utils.py

Module provides helper functions.
"""
import math
import time
from functools import wraps

from loguru import logger

SNAP_TOLERANCE = 1e-9


def snap(value: float, tolerance: float = SNAP_TOLERANCE) -> float:
    """
    Round a value to the nearest integer when it is within floating-point noise of it.

    ``0.3 / 0.1`` evaluates to ``2.9999999999999996``; snapping returns ``3.0`` so that
    the interval discretisation does not lose a sample to representation error.

    :param value: The value to snap.
    :param tolerance: Relative tolerance (absolute below 1).
    :return: The snapped value.
    """
    nearest = round(value)
    if abs(value - nearest) <= tolerance * max(1.0, abs(value)):
        return float(nearest)
    return value


def ceil_steps(seconds: float, ts: float) -> int:
    """
    Number of whole sampling periods needed to reach ``seconds``, rounding up.

    :param seconds: Time offset in seconds.
    :param ts: Sampling period in seconds.
    :return: ``ceil(seconds / ts)`` after snapping.
    """
    return int(math.ceil(snap(seconds / ts)))


def floor_steps(seconds: float, ts: float) -> int:
    """
    Number of whole sampling periods contained in ``seconds``, rounding down.

    :param seconds: Time offset in seconds.
    :param ts: Sampling period in seconds.
    :return: ``floor(seconds / ts)`` after snapping.
    """
    return int(math.floor(snap(seconds / ts)))


def timed(func):
    """
    A decorator that logs the wall time spent in the decorated function.

    :param func: The function to be decorated.
    :type func: callable
    :return: The wrapped function, returning what ``func`` returns.
    :rtype: callable
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            logger.debug("{} took {:.3f} s", func.__qualname__, time.perf_counter() - start)

    return wrapper
