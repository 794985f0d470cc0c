from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from multifield.core.exceptions import InputError
from multifield.models.body import MotionState


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time levels of MotionState with uniform step dt."""
    states: Tuple[MotionState, ...]
    dt: float
    energy_history: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise InputError("a trajectory needs at least one time level", field="states")
        if self.dt <= 0:
            raise InputError(f"dt must be positive, got {self.dt}", field="dt")
        grid = states[0].grid
        for k, state in enumerate(states):
            if not state.grid.same_as(grid) or state.manifold.tag != states[0].manifold.tag:
                raise InputError(f"time level {k} is not on the trajectory grid/manifold", field="states")
        times = np.array([s.t for s in states])
        if len(times) > 1 and np.max(np.abs(np.diff(times) - self.dt)) > 1e-9 * max(1.0, abs(times[-1])):
            raise InputError("trajectory time levels are not uniformly spaced by dt", field="dt")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "energy_history", tuple(float(e) for e in self.energy_history))

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, index) -> MotionState:
        return self.states[index]

    @property
    def grid(self):
        return self.states[0].grid

    @property
    def manifold(self):
        return self.states[0].manifold

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def stack(self, name: str) -> np.ndarray:
        """Stack one jet component over time, time on axis 0."""
        return np.stack([getattr(s, name) for s in self.states], axis=0)

    def window(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.states[start:stop], self.dt)

    def as_list(self) -> List[MotionState]:
        return list(self.states)
