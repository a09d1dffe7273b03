"""
Boolean, quantitative and smooth semantics of STL formulas over sampled traces.

Every evaluator works on whole signals: the value of a sub-formula is computed at
every sample index ``i`` for which the trace still covers the sub-formula's horizon,
so a node's signal is ``n_samples - steps(node)`` long. Windows are discretised
inward (``ceil(lo / Ts)`` to ``floor(hi / Ts)``).

The smooth semantics replaces every ``max`` by the log-sum-exp soft maximum
``(1/k) ln sum exp(k v)`` and every ``min`` by the matching soft minimum. Box margins
stay exact; the separation norm is regularised as ``sqrt(|d|^2 + eta^2)``. The
gradient with respect to the sampled positions is obtained by a reverse pass over
the same recursion.
"""
import math
from collections.abc import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp
from scipy.special import softmax as softmax_weights

from stlfleet.exceptions import StlFleetEmptyWindowException, StlFleetInsufficientTraceException
from stlfleet.stl.formula import (
    TEMPORAL,
    Always,
    And,
    Formula,
    Implies,
    Interval,
    Not,
    Or,
    Pred,
    TrueFormula,
    Until,
    children,
    horizon,
    predicate_gradients,
    predicate_values,
)
from stlfleet.trajectory import Trace
from stlfleet.utils import ceil_steps, floor_steps
from stlfleet.validators import validate_temperature

TRUE_ROBUSTNESS = 1e9
SEPARATION_ETA = 1e-9
DEFAULT_TEMPERATURE = 25.0

_Backward = Callable[[np.ndarray], None]


# -- windows -----------------------------------------------------------------


def window_steps(iv: Interval, ts: float) -> tuple[int, int]:
    """
    Sample offsets ``(ceil(lo / Ts), floor(hi / Ts))`` covered by an interval.

    :raises StlFleetEmptyWindowException: If no sample falls in the interval.
    """
    first, last = ceil_steps(iv.lo, ts), floor_steps(iv.hi, ts)
    if first > last:
        raise StlFleetEmptyWindowException(f"interval [{iv.lo}, {iv.hi}] holds no sample at Ts={ts}")
    return first, last


def to_index_window(iv: Interval, ts: float, base: int, n: int) -> range:
    """
    Sample indices of the interval shifted to ``base``, clipped to ``[0, n - 1]``.

    :param iv: The interval.
    :param ts: Sampling period in seconds.
    :param base: Index the interval is relative to.
    :param n: Trace length.
    :return: The index range.
    :raises StlFleetEmptyWindowException: If the interval holds no sample or lies past the trace.
    """
    first, last = window_steps(iv, ts)
    lo, hi = base + first, min(base + last, n - 1)
    if lo > hi:
        raise StlFleetEmptyWindowException(f"window starting at {lo} lies beyond a trace of length {n}")
    return range(lo, hi + 1)


def check_windows(f: Formula, ts: float) -> None:
    """
    Raise :class:`StlFleetEmptyWindowException` if any interval of ``f`` holds no sample.
    """
    if isinstance(f, (*TEMPORAL, Until)):
        window_steps(f.interval, ts)
    for child in children(f):
        check_windows(child, ts)


def step_horizon(f: Formula, ts: float) -> int:
    """Horizon of ``f`` in samples, after inward discretisation of its intervals."""
    if isinstance(f, (TrueFormula, Pred)):
        return 0
    inner = max(step_horizon(child, ts) for child in children(f))
    if isinstance(f, (*TEMPORAL, Until)):
        return window_steps(f.interval, ts)[1] + inner
    return inner


def _check_coverage(f: Formula, tr: Trace, i: int) -> None:
    last = tr.n_samples - 1
    if not 0 <= i <= last or i + horizon(f) / tr.ts > last + 1e-9:
        raise StlFleetInsufficientTraceException(
            f"trace of {tr.n_samples} samples at Ts={tr.ts} does not cover horizon {horizon(f)} s from index {i}"
        )


# -- exact semantics ---------------------------------------------------------


def _exact_signal(f: Formula, tr: Trace, boolean: bool) -> np.ndarray:
    n = tr.n_samples
    if isinstance(f, TrueFormula):
        return np.full(n, True if boolean else TRUE_ROBUSTNESS)
    if isinstance(f, Pred):
        margin = predicate_values(f.predicate, tr.positions, tr.agent_index)
        return margin >= 0 if boolean else margin
    if isinstance(f, Not):
        child = _exact_signal(f.child, tr, boolean)
        return np.logical_not(child) if boolean else -child
    if isinstance(f, (And, Or, Implies)):
        parts = [_exact_signal(child, tr, boolean) for child in children(f)]
        if isinstance(f, Implies):
            parts[0] = np.logical_not(parts[0]) if boolean else -parts[0]
        length = min(len(part) for part in parts)
        stack = np.stack([part[:length] for part in parts], axis=1)
        return stack.min(axis=1) if isinstance(f, And) else stack.max(axis=1)
    first, last = window_steps(f.interval, tr.ts)
    if isinstance(f, TEMPORAL):
        child = _exact_signal(f.child, tr, boolean)
        length = len(child) - last
        if length <= 0:
            return child[:0]
        windows = sliding_window_view(child, last - first + 1)[first : first + length]
        return windows.min(axis=1) if isinstance(f, Always) else windows.max(axis=1)
    left = _exact_signal(f.left, tr, boolean)
    right = _exact_signal(f.right, tr, boolean)
    length = min(len(left), len(right)) - last
    if length <= 0:
        return left[:0]
    running = left[:length]
    best = None
    for offset in range(last + 1):
        running = np.minimum(running, left[offset : offset + length])
        if offset >= first:
            candidate = np.minimum(right[offset : offset + length], running)
            best = candidate if best is None else np.maximum(best, candidate)
    return best


def boolean_satisfaction(f: Formula, tr: Trace, i: int = 0) -> bool:
    """
    Pointwise (Boolean) satisfaction of ``f`` by the trace at sample ``i``.

    :param f: The formula; box predicates must be bound.
    :param tr: The trace.
    :param i: Sample index.
    :return: Whether the formula holds.
    :raises StlFleetInsufficientTraceException: If the trace does not cover the horizon from ``i``.
    """
    _check_coverage(f, tr, i)
    return bool(_exact_signal(f, tr, boolean=True)[i])


def robustness_signal(f: Formula, tr: Trace) -> np.ndarray:
    """
    Exact robustness of ``f`` at every index whose future the trace covers.

    :return: Array of length ``n_samples - step_horizon(f)``.
    """
    return _exact_signal(f, tr, boolean=False)


def robustness(f: Formula, tr: Trace, i: int = 0) -> float:
    """
    Exact robustness ``rho`` of ``f`` on the trace at sample ``i``, in meters.

    ``True`` has robustness :data:`TRUE_ROBUSTNESS`.

    :raises StlFleetInsufficientTraceException: If the trace does not cover the horizon from ``i``.
    """
    _check_coverage(f, tr, i)
    return float(robustness_signal(f, tr)[i])


# -- smooth semantics --------------------------------------------------------


def softmax(values, k: float = DEFAULT_TEMPERATURE, axis: int = -1):
    """
    Log-sum-exp soft maximum ``(1/k) ln sum exp(k v)`` along ``axis``.

    Evaluated in max-shifted form, so large ``k`` does not overflow.
    """
    return logsumexp(k * np.asarray(values, dtype=float), axis=axis) / k


def softmin(values, k: float = DEFAULT_TEMPERATURE, axis: int = -1):
    """Soft minimum ``-softmax(-v)``."""
    return -softmax(-np.asarray(values, dtype=float), k, axis)


def _soft_reduce(stack: np.ndarray, k: float, maximum: bool) -> tuple[np.ndarray, np.ndarray]:
    if stack.shape[1] == 1:
        return stack[:, 0], np.ones_like(stack)
    scaled = k * stack if maximum else -k * stack
    value = logsumexp(scaled, axis=1) / k
    return (value if maximum else -value), softmax_weights(scaled, axis=1)


class _SmoothPass:
    """One forward evaluation of the smooth semantics, keeping the reverse pass."""

    def __init__(self, tr: Trace, k: float):
        self.tr = tr
        self.k = k
        self.index = tr.agent_index
        self.grad = np.zeros(tr.positions.shape)

    def visit(self, f: Formula) -> tuple[np.ndarray, _Backward]:
        if isinstance(f, TrueFormula):
            return np.full(self.tr.n_samples, TRUE_ROBUSTNESS), lambda adj: None
        if isinstance(f, Pred):
            return self._predicate(f)
        if isinstance(f, Not):
            value, backward = self.visit(f.child)
            return -value, lambda adj: backward(-adj)
        if isinstance(f, (And, Or, Implies)):
            return self._boolean(f)
        if isinstance(f, TEMPORAL):
            return self._temporal(f)
        return self._until(f)

    def _predicate(self, f: Pred) -> tuple[np.ndarray, _Backward]:
        positions = self.tr.positions
        value = predicate_values(f.predicate, positions, self.index, SEPARATION_ETA)

        def backward(adj: np.ndarray) -> None:
            for column, grad in predicate_gradients(f.predicate, positions, self.index, SEPARATION_ETA):
                self.grad[:, column] += adj[:, None] * grad

        return value, backward

    def _boolean(self, f: And | Or | Implies) -> tuple[np.ndarray, _Backward]:
        parts = [self.visit(child) for child in children(f)]
        signs = [1.0] * len(parts)
        if isinstance(f, Implies):
            signs[0] = -1.0
        length = min(len(value) for value, _ in parts)
        stack = np.stack([sign * value[:length] for sign, (value, _) in zip(signs, parts)], axis=1)
        value, weights = _soft_reduce(stack, self.k, maximum=not isinstance(f, And))

        def backward(adj: np.ndarray) -> None:
            for column, (sign, (child_value, child_backward)) in enumerate(zip(signs, parts)):
                child_adj = np.zeros(len(child_value))
                child_adj[:length] = sign * adj * weights[:, column]
                child_backward(child_adj)

        return value, backward

    def _temporal(self, f) -> tuple[np.ndarray, _Backward]:
        child_value, child_backward = self.visit(f.child)
        first, last = window_steps(f.interval, self.tr.ts)
        length = len(child_value) - last
        if length <= 0:
            return child_value[:0], lambda adj: None
        windows = sliding_window_view(child_value, last - first + 1)[first : first + length]
        value, weights = _soft_reduce(windows, self.k, maximum=not isinstance(f, Always))

        def backward(adj: np.ndarray) -> None:
            child_adj = np.zeros(len(child_value))
            for offset in range(weights.shape[1]):
                child_adj[first + offset : first + offset + length] += adj * weights[:, offset]
            child_backward(child_adj)

        return value, backward

    def _until(self, f) -> tuple[np.ndarray, _Backward]:
        left, left_backward = self.visit(f.left)
        right, right_backward = self.visit(f.right)
        first, last = window_steps(f.interval, self.tr.ts)
        length = min(len(left), len(right)) - last
        if length <= 0:
            return left[:0], lambda adj: None
        candidates, inner_weights = [], []
        for offset in range(first, last + 1):
            stack = np.stack(
                [right[offset : offset + length]] + [left[l : l + length] for l in range(offset + 1)], axis=1
            )
            candidate, weights = _soft_reduce(stack, self.k, maximum=False)
            candidates.append(candidate)
            inner_weights.append(weights)
        value, outer_weights = _soft_reduce(np.stack(candidates, axis=1), self.k, maximum=True)

        def backward(adj: np.ndarray) -> None:
            left_adj, right_adj = np.zeros(len(left)), np.zeros(len(right))
            for column, offset in enumerate(range(first, last + 1)):
                branch = adj * outer_weights[:, column]
                weights = inner_weights[column]
                right_adj[offset : offset + length] += branch * weights[:, 0]
                for l in range(offset + 1):
                    left_adj[l : l + length] += branch * weights[:, 1 + l]
            left_backward(left_adj)
            right_backward(right_adj)

        return value, backward


def smooth_robustness_and_gradient(
    f: Formula, tr: Trace, i: int = 0, k: float = DEFAULT_TEMPERATURE
) -> tuple[float, np.ndarray]:
    """
    Smooth robustness at sample ``i`` and its gradient with respect to every position sample.

    :return: ``(rho_tilde, gradient)`` where ``gradient`` has the shape of ``tr.positions`` (1/m).
    :raises StlFleetInsufficientTraceException: If the trace does not cover the horizon from ``i``.
    """
    k = validate_temperature(k)
    _check_coverage(f, tr, i)
    smooth = _SmoothPass(tr, k)
    value, backward = smooth.visit(f)
    seed = np.zeros(len(value))
    seed[i] = 1.0
    backward(seed)
    return float(value[i]), smooth.grad


def smooth_robustness(f: Formula, tr: Trace, i: int = 0, k: float = DEFAULT_TEMPERATURE) -> float:
    """
    Smooth robustness ``rho_tilde`` of ``f`` on the trace at sample ``i``.

    :raises StlFleetInsufficientTraceException: If the trace does not cover the horizon from ``i``.
    """
    k = validate_temperature(k)
    _check_coverage(f, tr, i)
    value, _ = _SmoothPass(tr, k).visit(f)
    return float(value[i])


def smooth_robustness_gradient(
    f: Formula, tr: Trace, i: int = 0, k: float = DEFAULT_TEMPERATURE
) -> np.ndarray:
    """
    Gradient of :func:`smooth_robustness` with respect to every agent position sample.

    :return: Array with the shape of ``tr.positions``; zero outside every active window.
    """
    return smooth_robustness_and_gradient(f, tr, i, k)[1]


# -- smoothing gap -----------------------------------------------------------


def aggregation_profile(f: Formula, ts: float) -> tuple[int, int]:
    """
    Aggregation depth ``D`` and maximum fan-in ``M`` of the smooth recursion of ``f``.

    ``D`` counts the soft max/min layers on the deepest root-to-leaf path; nodes with a
    single operand are not aggregations. ``Until`` contributes an inner soft minimum
    over ``j - i + 2`` operands and an outer soft maximum over the window.
    """
    if isinstance(f, (TrueFormula, Pred)):
        return 0, 1
    profiles = [aggregation_profile(child, ts) for child in children(f)]
    depth = max(d for d, _ in profiles)
    fan_in = max(m for _, m in profiles)
    if isinstance(f, Not):
        return depth, fan_in
    if isinstance(f, (And, Or, Implies)):
        width = len(children(f))
        return (depth + 1, max(fan_in, width)) if width > 1 else (depth, fan_in)
    first, last = window_steps(f.interval, ts)
    width = last - first + 1
    if isinstance(f, TEMPORAL):
        return (depth + 1, max(fan_in, width)) if width > 1 else (depth, fan_in)
    depth, fan_in = depth + 1, max(fan_in, last + 2)
    return (depth + 1, max(fan_in, width)) if width > 1 else (depth, fan_in)


def smoothing_gap_bound(f: Formula, ts: float, k: float = DEFAULT_TEMPERATURE) -> float:
    """
    Upper bound ``D ln(M) / k`` on ``|rho_tilde - rho|`` (up to the separation regularisation).
    """
    depth, fan_in = aggregation_profile(f, ts)
    return depth * math.log(fan_in) / validate_temperature(k)
