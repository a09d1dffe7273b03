"""
Sampled multi-agent trajectories.

A :class:`Trace` holds positions, velocities and accelerations of every agent at
``n_samples`` uniformly spaced instants ``0, Ts, 2 Ts, ...``. Arrays are stored
sample-major with shape ``(n_samples, n_agents, 3)`` and are read-only.
"""
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from stlfleet.exceptions import StlFleetDimensionMismatchException, StlFleetUnknownNameException


def _frozen_array(values, shape: tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.shape != shape:
        raise StlFleetDimensionMismatchException(f"{name} has shape {array.shape}, expected {shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Trace:
    """
    Uniformly sampled states of a fleet.

    :ivar ts: Sampling period in seconds.
    :ivar agents: Agent names, in column order.
    :ivar positions: Positions, meters.
    :ivar velocities: Velocities, m/s.
    :ivar accelerations: Accelerations, m/s^2.
    """

    ts: float
    agents: tuple[str, ...]
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray

    def __post_init__(self):
        if not self.ts > 0:
            raise StlFleetDimensionMismatchException(f"sampling period must be > 0, got {self.ts}")
        agents = tuple(self.agents)
        if len(set(agents)) != len(agents):
            raise StlFleetDimensionMismatchException(f"duplicate agent names in {agents}")
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim != 3 or positions.shape[0] < 1 or positions.shape[1:] != (len(agents), 3):
            raise StlFleetDimensionMismatchException(
                f"positions have shape {positions.shape}, expected (n>=1, {len(agents)}, 3)"
            )
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "positions", _frozen_array(positions, positions.shape, "positions"))
        object.__setattr__(self, "velocities", _frozen_array(self.velocities, positions.shape, "velocities"))
        object.__setattr__(
            self, "accelerations", _frozen_array(self.accelerations, positions.shape, "accelerations")
        )

    @classmethod
    def from_positions(cls, ts: float, agents: Sequence[str], positions) -> "Trace":
        """Trace with zero velocities and accelerations."""
        positions = np.asarray(positions, dtype=float)
        return cls(ts, tuple(agents), positions, np.zeros_like(positions), np.zeros_like(positions))

    @property
    def n_samples(self) -> int:
        """Number of samples (``N + 1``)."""
        return self.positions.shape[0]

    @property
    def duration(self) -> float:
        """Time of the last sample."""
        return (self.n_samples - 1) * self.ts

    @property
    def times(self) -> np.ndarray:
        """Sample times."""
        return np.arange(self.n_samples) * self.ts

    @property
    def agent_index(self) -> dict[str, int]:
        """Agent name to column."""
        return {name: i for i, name in enumerate(self.agents)}

    def agent(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Position, velocity and acceleration sequences of one agent.

        :raises StlFleetUnknownNameException: If the agent is not part of the trace.
        """
        if name not in self.agents:
            raise StlFleetUnknownNameException(name, "agent")
        column = self.agents.index(name)
        return self.positions[:, column], self.velocities[:, column], self.accelerations[:, column]

    def state(self, i: int) -> dict[str, np.ndarray]:
        """Positions of the fleet at sample ``i``, keyed by agent."""
        return {name: self.positions[i, column] for column, name in enumerate(self.agents)}

    def min_separation(self) -> float | None:
        """Smallest pairwise distance over all samples, ``None`` for a single agent."""
        if len(self.agents) < 2:
            return None
        deltas = self.positions[:, :, None, :] - self.positions[:, None, :, :]
        distances = np.sqrt(np.sum(deltas * deltas, axis=-1))
        upper = np.triu_indices(len(self.agents), k=1)
        return float(distances[:, upper[0], upper[1]].min())
