"""One-dimensional periodic linear wave equation, semi-discretized in space."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..domain import PhaseState, StateDerivative
from ..errors import DimensionError


def periodic_laplacian(n: int, dx: float) -> sp.csr_matrix:
    """Three-point periodic second-difference matrix scaled by ``1/dx**2``."""
    if n < 3:
        raise ValueError("periodic three-point stencil needs n >= 3")
    inv = 1.0 / (dx * dx)
    rows = np.repeat(np.arange(n), 3)
    cols = np.stack([np.arange(n) - 1, np.arange(n), np.arange(n) + 1], axis=1).ravel() % n
    vals = np.tile([inv, -2.0 * inv, inv], n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


class WaveSystem:
    name = "wave"
    separable = True

    def __init__(self, n_grid=125, space_max=1.0, wave_speed=0.1):
        self.n_grid = int(n_grid)
        self.space_max = float(space_max)
        self.wave_speed = float(wave_speed)
        self.dx = self.space_max / self.n_grid
        self.dxx = periodic_laplacian(self.n_grid, self.dx)
        self._c2dxx = (self.wave_speed**2 * self.dxx).tocsr()

    @property
    def nq(self):
        return self.n_grid

    @property
    def dim(self):
        return 2 * self.n_grid

    def grid_points(self):
        return np.arange(self.n_grid, dtype=np.float64) * self.dx

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        n = self.n_grid
        if x.shape[-1] != 2 * n:
            raise DimensionError(f"wave state must have {2 * n} entries, got {x.shape[-1]}")
        flat = x.reshape(-1, 2 * n)
        out = np.empty_like(flat)
        out[:, :n] = flat[:, n:]
        out[:, n:] = (self._c2dxx @ flat[:, :n].T).T
        return out.reshape(x.shape)

    def linear_operator(self):
        n = self.n_grid
        eye = sp.identity(n, format="csr")
        zero = sp.csr_matrix((n, n))
        return sp.bmat([[zero, eye], [self._c2dxx, zero]], format="csr")

    def energy(self, x):
        """Discrete energy ``0.5*|p|^2 - 0.5*c^2 q^T Dxx q`` times ``dx``."""
        x = np.asarray(x, dtype=np.float64)
        n = self.n_grid
        q = x[..., :n].reshape(-1, n)
        p = x[..., n:].reshape(-1, n)
        pot = -np.einsum("bi,bi->b", q, (self._c2dxx @ q.T).T)
        e = 0.5 * self.dx * (np.einsum("bi,bi->b", p, p) + pot)
        return e.reshape(x.shape[:-1])

    def system_args(self):
        return {"n_grid": self.n_grid, "space_max": self.space_max}

    def metadata(self):
        return {"n_grid": self.n_grid, "space_max": self.space_max}


def wave_derivative(system: WaveSystem, s: PhaseState) -> StateDerivative:
    n = system.n_grid
    if s.q.shape != (n,) or s.p.shape != (n,):
        raise DimensionError(f"wave state must have q and p of length {n}")
    return StateDerivative(s.p.copy(), system.wave_speed**2 * (system.dxx @ s.q))


def spline_kernel(s, height=1.0):
    """Compactly supported cubic spline ``h(s)``, ``h(0) = height``, zero for ``s > 2``."""
    s = np.abs(np.asarray(s, dtype=np.float64))
    inner = 1.0 - 1.5 * s**2 + 0.75 * s**3
    outer = 0.25 * (2.0 - s) ** 3
    return height * np.where(s <= 1.0, inner, np.where(s <= 2.0, outer, 0.0))


def wave_spline_pulse(p_w, p_h, n_grid, space_max=1.0, position=0.5):
    """Spline pulse sampled on ``x_i = i * space_max / n_grid``."""
    if not p_w > 0:
        raise ValueError("pulse width must be positive")
    x = np.arange(n_grid, dtype=np.float64) * (space_max / n_grid)
    return spline_kernel((10.0 / p_w) * np.abs(x - position), p_h)
