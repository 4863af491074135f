"""Core state, time-grid and trajectory types.

States are stored packed as ``[q; p]`` float64 vectors wherever numerics
happen; :class:`PhaseState` is the unpacked view used at API boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def _frozen_array(values):
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_array(np.atleast_1d(self.q)))
        object.__setattr__(self, "p", _frozen_array(np.atleast_1d(self.p)))

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)))


@dataclass(frozen=True)
class StateDerivative:
    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dq", _frozen_array(np.atleast_1d(self.dq)))
        object.__setattr__(self, "dp", _frozen_array(np.atleast_1d(self.dp)))


def pack_state(s: PhaseState) -> np.ndarray:
    """Concatenate ``q`` and ``p`` into a single state vector."""
    return np.concatenate([s.q, s.p])


def unpack_state(v, nq: int) -> PhaseState:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or nq < 0 or v.shape[0] < nq:
        raise DimensionError(f"cannot split vector of shape {v.shape} at nq={nq}")
    return PhaseState(v[:nq], v[nq:])


def pack_derivative(d: StateDerivative) -> np.ndarray:
    return np.concatenate([d.dq, d.dp])


def unpack_derivative(v, nq: int) -> StateDerivative:
    s = unpack_state(v, nq)
    return StateDerivative(s.q, s.p)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of stored snapshots ``t_k = k * step`` for ``k < count``.

    The integrator runs ``subsample`` inner steps of size ``step / subsample``
    between consecutive stored snapshots.
    """

    step: float
    count: int
    subsample: int = 1
    t0: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"count must be an integer >= 1, got {self.count}")
        if int(self.subsample) != self.subsample or self.subsample < 1:
            raise ValueError(f"subsample must be an integer >= 1, got {self.subsample}")
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "subsample", int(self.subsample))

    @property
    def inner_step(self) -> float:
        return self.step / self.subsample

    @property
    def final_time(self) -> float:
        return (self.count - 1) * self.step

    def times(self) -> np.ndarray:
        # multiplicative, never accumulated
        return np.arange(self.count, dtype=np.float64) * self.step


@dataclass(frozen=True)
class Trajectory:
    """Stored snapshots of one simulation run.

    ``states`` and ``derivatives`` are ``(count, nq + np)`` packed arrays.
    """

    grid: TimeGrid
    states: np.ndarray
    derivatives: np.ndarray
    nq: int
    gen_time_seconds: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen_array(self.states))
        object.__setattr__(self, "derivatives", _frozen_array(self.derivatives))

    @property
    def q(self) -> np.ndarray:
        return self.states[:, : self.nq]

    @property
    def p(self) -> np.ndarray:
        return self.states[:, self.nq :]

    @property
    def dqdt(self) -> np.ndarray:
        return self.derivatives[:, : self.nq]

    @property
    def dpdt(self) -> np.ndarray:
        return self.derivatives[:, self.nq :]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times()

    def phase_states(self) -> list[PhaseState]:
        return [unpack_state(x, self.nq) for x in self.states]

    def __len__(self):
        return self.states.shape[0]


def validate_trajectory(tr: Trajectory, derivative=None, atol: float = 0.0) -> list[str]:
    """Return a list of violated trajectory invariants (empty when valid).

    If ``derivative`` is given, each stored derivative is also compared with
    ``derivative(state)``; ``atol`` bounds the allowed max-abs difference.
    """
    violations = []
    states = np.asarray(tr.states)
    derivs = np.asarray(tr.derivatives)
    if states.ndim != 2 or derivs.ndim != 2:
        violations.append("states and derivatives must be 2-D arrays")
        return violations
    if states.shape[0] != derivs.shape[0]:
        violations.append("length mismatch")
    elif states.shape[1] != derivs.shape[1]:
        violations.append("dimension mismatch")
    if states.shape[0] != tr.grid.count:
        violations.append(f"grid count {tr.grid.count} != {states.shape[0]} states")
    if not 0 <= tr.nq <= states.shape[1]:
        violations.append(f"nq={tr.nq} out of range")
    for k in np.flatnonzero(~np.all(np.isfinite(states), axis=1)):
        violations.append(f"non-finite at {k}")
    for k in np.flatnonzero(~np.all(np.isfinite(derivs), axis=1)):
        violations.append(f"non-finite derivative at {k}")
    if tr.gen_time_seconds < 0:
        violations.append("negative generation time")
    if derivative is not None and not violations:
        expected = derivative(states)
        bad = np.flatnonzero(np.max(np.abs(expected - derivs), axis=1) > atol)
        violations.extend(f"derivative mismatch at {k}" for k in bad)
    return violations
