"""Task kinds and extraction of (input, target) training pairs."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..errors import DimensionError


class TaskKind(str, Enum):
    DERIVATIVE = "derivative"
    STEP = "step"

    @classmethod
    def parse(cls, value):
        return value if isinstance(value, cls) else cls(str(value).lower())


def training_pairs(trajectories, task, stride=1):
    """Stack inputs and targets over trajectories.

    Derivative prediction pairs every stored state with its derivative. Step
    prediction pairs each state with its successor, so the final snapshot of
    every trajectory is never an input. ``stride`` thins the snapshots used.
    """
    task = TaskKind.parse(task)
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("at least one trajectory is required")
    xs, ys = [], []
    for tr in trajectories:
        states = np.asarray(tr.states)
        if task is TaskKind.DERIVATIVE:
            xs.append(states[::stride])
            ys.append(np.asarray(tr.derivatives)[::stride])
        else:
            xs.append(states[:-1][::stride])
            ys.append(states[1:][::stride])
    dims = {x.shape[1] for x in xs}
    if len(dims) != 1:
        raise DimensionError(f"trajectories have differing state sizes {sorted(dims)}")
    return np.concatenate(xs), np.concatenate(ys)
