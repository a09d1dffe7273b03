"""
Minimum-jerk quintic motion primitives.

Each axis of a segment is the unique polynomial of degree at most five that matches
position, velocity and acceleration at both ends of ``[0, tau]``. The vehicle model is
the per-axis triple integrator, so jerk is the input and the quintic is its
jerk-optimal interpolant. Kinematic limits are per-axis boxes ``|v| <= vmax``,
``|a| <= amax``, checked exactly from the roots of the acceleration and jerk
polynomials.
"""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from pydantic import BaseModel, ConfigDict, model_validator

from stlfleet.exceptions import StlFleetDegenerateSamplingException, StlFleetInvalidSpecException
from stlfleet.utils import floor_steps
from stlfleet.validators import validate_duration, validate_finite

Vec3 = tuple[float, float, float]
ZERO: Vec3 = (0.0, 0.0, 0.0)

# Boundary system for the normalised high-order coefficients (c3 tau^3, c4 tau^4, c5 tau^5).
_BOUNDARY_SYSTEM = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
_NEWTON_STEPS = 3


class KnotState(BaseModel):
    """
    Full kinematic state at a segment boundary.

    :ivar p: Position, meters.
    :ivar v: Velocity, m/s.
    :ivar a: Acceleration, m/s^2.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    p: Vec3
    v: Vec3 = ZERO
    a: Vec3 = ZERO

    @model_validator(mode="after")
    def _check_finite(self) -> "KnotState":
        validate_finite("knot state", (*self.p, *self.v, *self.a))
        return self

    @classmethod
    def hover(cls, p) -> "KnotState":
        """State at rest at ``p``."""
        return cls(p=tuple(float(x) for x in p))

    @classmethod
    def from_array(cls, values) -> "KnotState":
        """Build from a ``(3, 3)`` array whose rows are ``p``, ``v``, ``a``."""
        rows = np.asarray(values, dtype=float).reshape(3, 3)
        return cls(p=tuple(rows[0]), v=tuple(rows[1]), a=tuple(rows[2]))

    def as_array(self) -> np.ndarray:
        """``(3, 3)`` array whose rows are ``p``, ``v``, ``a``."""
        return np.array([self.p, self.v, self.a], dtype=float)


class KinematicBounds(BaseModel):
    """Per-axis symmetric speed and acceleration limits."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    vmax: float
    amax: float

    @model_validator(mode="after")
    def _check_positive(self) -> "KinematicBounds":
        for name, value in (("vmax", self.vmax), ("amax", self.amax)):
            if not (np.isfinite(value) and value > 0):
                raise StlFleetInvalidSpecException(f"{name} must be finite and > 0, got {value}")
        return self


class FeasibilityReport(BaseModel):
    """
    Kinematic margins of one segment.

    Margins are ``vmax - max|v|`` and ``amax - max|a|`` per axis; the segment is
    feasible iff all six are non-negative.
    """

    model_config = ConfigDict(frozen=True)

    max_velocity: Vec3
    max_acceleration: Vec3
    velocity_margin: Vec3
    acceleration_margin: Vec3
    feasible: bool

    @property
    def violation(self) -> float:
        """Sum of squared negative margins."""
        margins = np.array([*self.velocity_margin, *self.acceleration_margin])
        return float(np.sum(np.minimum(margins, 0.0) ** 2))


@dataclass(frozen=True)
class QuinticSegment:
    """
    A quintic per axis over local time ``[0, duration]``.

    :ivar duration: Segment duration in seconds.
    :ivar coefficients: ``(3, 6)`` array, one row per axis, ascending powers of ``t``.
    """

    duration: float
    coefficients: np.ndarray

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=float).reshape(3, 6)
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    def derivative(self, order: int) -> np.ndarray:
        """Coefficients of the ``order``-th time derivative, ``(3, 6 - order)``."""
        return P.polyder(self.coefficients, m=order, axis=1)

    @property
    def jerk_coefficients(self) -> np.ndarray:
        """Coefficients of the jerk polynomial (quadratic per axis)."""
        return self.derivative(3)

    def evaluate(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Exact position, velocity and acceleration at local times.

        :param times: Local times in seconds, scalar or 1-D.
        :return: Three arrays of shape ``(len(times), 3)``.
        """
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return tuple(P.polyval(t, c.T).T for c in (self.coefficients, self.derivative(1), self.derivative(2)))

    def state(self, t: float) -> KnotState:
        """Kinematic state at local time ``t``."""
        p, v, a = self.evaluate([t])
        return KnotState(p=tuple(p[0]), v=tuple(v[0]), a=tuple(a[0]))


def quintic_coefficients(start: np.ndarray, end: np.ndarray, duration: float) -> np.ndarray:
    """
    Quintic coefficients for stacked boundary states.

    The three low-order coefficients follow from the start state; the three high-order
    ones solve a 3x3 system in normalised time, shared by all axes and segments.

    :param start: Start states, shape ``(..., 3, 3)`` with rows ``p``, ``v``, ``a``.
    :param end: End states, same shape.
    :param duration: Segment duration in seconds, assumed valid.
    :return: Coefficients of shape ``(..., 3, 6)``, one row per axis.
    """
    tau = duration
    p0, v0, a0 = start[..., 0, :], start[..., 1, :], start[..., 2, :]
    p1, v1, a1 = end[..., 0, :], end[..., 1, :], end[..., 2, :]
    rhs = np.stack(
        [
            p1 - p0 - v0 * tau - 0.5 * a0 * tau**2,
            (v1 - v0 - a0 * tau) * tau,
            (a1 - a0) * tau**2,
        ],
        axis=-2,
    )
    high = np.linalg.solve(np.broadcast_to(_BOUNDARY_SYSTEM, rhs.shape[:-2] + (3, 3)), rhs)
    return np.stack(
        [p0, v0, 0.5 * a0, high[..., 0, :] / tau**3, high[..., 1, :] / tau**4, high[..., 2, :] / tau**5], axis=-1
    )


def solve_segment(start: KnotState, end: KnotState, duration: float) -> QuinticSegment:
    """
    Minimum-jerk quintic joining two kinematic states.

    :param start: State at ``t = 0``.
    :param end: State at ``t = duration``.
    :param duration: Segment duration in seconds.
    :return: The segment.
    :raises StlFleetNonfiniteInputException: If a boundary component is not finite.
    :raises StlFleetDegenerateDurationException: If ``duration <= 0``.
    """
    tau = validate_duration(duration)
    s, e = start.as_array(), end.as_array()
    validate_finite("segment boundary", np.concatenate([s.ravel(), e.ravel()]))
    return QuinticSegment(tau, quintic_coefficients(s, e, tau))


def sample_segment(
    seg: QuinticSegment, ts: float, offset: float = 0.0
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate a segment at ``offset, offset + Ts, ...`` up to its duration.

    :param seg: The segment.
    :param ts: Sampling period in seconds.
    :param offset: Local time of the first sample, ``0 <= offset < Ts``.
    :return: ``(times, positions, velocities, accelerations)``, arrays of shape ``(n,)`` and ``(n, 3)``.
    :raises StlFleetDegenerateSamplingException: If the parameters are invalid or no sample falls in the segment.
    """
    if not (np.isfinite(ts) and ts > 0):
        raise StlFleetDegenerateSamplingException(f"sampling period must be > 0, got {ts}")
    if not 0 <= offset < ts:
        raise StlFleetDegenerateSamplingException(f"offset {offset} outside [0, {ts})")
    count = floor_steps(seg.duration - offset, ts) + 1
    if count <= 0:
        raise StlFleetDegenerateSamplingException(
            f"no sample of period {ts} from offset {offset} falls in a segment of {seg.duration} s"
        )
    times = offset + ts * np.arange(count)
    return (times, *seg.evaluate(times))


def _polished_roots(coefficients: np.ndarray, derivative: np.ndarray, duration: float) -> np.ndarray:
    roots = np.clip(P.polyroots(coefficients).real, 0.0, duration)
    for _ in range(_NEWTON_STEPS):
        slope = P.polyval(roots, derivative)
        step = np.divide(P.polyval(roots, coefficients), slope, out=np.zeros_like(roots), where=slope != 0)
        roots = np.clip(roots - step, 0.0, duration)
    return roots


def axis_extrema(coefficients: np.ndarray, duration: float) -> tuple[float, float]:
    """
    Exact ``(max |v|, max |a|)`` over ``[0, duration]`` of one axis quintic.

    Candidates are the endpoints plus the (real parts of the) roots of the next
    derivative; every candidate is a point of the interval, so the maximum over them
    never overshoots.

    :param coefficients: Six position coefficients, ascending.
    :param duration: Segment duration in seconds.
    """
    velocity = P.polyder(coefficients, 1)
    acceleration = P.polyder(coefficients, 2)
    jerk = P.polyder(coefficients, 3)
    snap = P.polyder(coefficients, 4)
    ends = np.array([0.0, duration])
    v_times = np.concatenate([ends, _polished_roots(acceleration, jerk, duration)])
    a_times = np.concatenate([ends, _polished_roots(jerk, snap, duration)])
    return float(np.abs(P.polyval(v_times, velocity)).max()), float(np.abs(P.polyval(a_times, acceleration)).max())


def segment_extrema(seg: QuinticSegment) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-axis peak speed and peak acceleration magnitude over the segment.

    :return: ``(max |v|, max |a|)``, two arrays of 3 values.
    """
    peaks = np.array([axis_extrema(row, seg.duration) for row in seg.coefficients])
    return peaks[:, 0], peaks[:, 1]


def check_feasibility(seg: QuinticSegment, bounds: KinematicBounds) -> FeasibilityReport:
    """
    Compare the exact extrema of a segment with kinematic bounds.

    :param seg: The segment.
    :param bounds: Per-axis limits.
    :return: The margin report.
    """
    vpeak, apeak = segment_extrema(seg)
    vmargin, amargin = bounds.vmax - vpeak, bounds.amax - apeak
    return FeasibilityReport(
        max_velocity=tuple(vpeak),
        max_acceleration=tuple(apeak),
        velocity_margin=tuple(vmargin),
        acceleration_margin=tuple(amargin),
        feasible=bool(np.all(vmargin >= 0) and np.all(amargin >= 0)),
    )
