"""Unit-mass, unit-stiffness harmonic oscillator with zero rest length."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..domain import PhaseState, StateDerivative
from ..errors import DimensionError


_ROTATE = np.array([1.0, -1.0])


class SpringSystem:
    name = "spring"
    nq = 1
    dim = 2
    separable = True

    def derivative(self, x):
        """Return ``(p, -q)`` for packed states of shape ``(..., 2)``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != 2:
            raise DimensionError(f"spring state must have 2 entries, got {x.shape[-1]}")
        return x[..., ::-1] * _ROTATE

    def linear_operator(self):
        return sp.csr_matrix(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def energy(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x[..., 0] ** 2 + x[..., 1] ** 2

    def system_args(self):
        return {}

    def metadata(self):
        return {"n_grid": 1}


def spring_derivative(s: PhaseState) -> StateDerivative:
    if s.q.shape != (1,) or s.p.shape != (1,):
        raise DimensionError("spring state must be one-dimensional")
    return StateDerivative(s.p.copy(), -s.q)


def spring_closed_form(r: float, theta0: float, t) -> PhaseState:
    """Exact spring state at time ``t`` on the phase circle of radius ``r``."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    return PhaseState(r * np.sin(t + theta0), r * np.cos(t + theta0))


def spring_closed_form_states(x0, times) -> np.ndarray:
    """Packed exact states ``(len(times), 2)`` starting from packed ``x0``."""
    q0, p0 = float(x0[0]), float(x0[1])
    r = np.hypot(q0, p0)
    theta0 = np.arctan2(q0, p0)
    times = np.asarray(times, dtype=np.float64)
    return np.stack([r * np.sin(times + theta0), r * np.cos(times + theta0)], axis=-1)
