"""Two-dimensional mass-spring mesh with per-particle velocity damping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import PhaseState, StateDerivative
from ..errors import DimensionError, SingularityError


@dataclass(frozen=True)
class Particle:
    position: tuple
    mass: float = 1.0
    is_fixed: bool = False


@dataclass(frozen=True)
class Spring:
    a: int
    b: int
    rest_length: float
    spring_const: float = 1.0


class SpringMeshSystem:
    """Particles joined by linear springs.

    Damping ``-vel_decay * qdot`` is applied once per particle, independent of
    how many springs meet there. Fixed particles have zero derivative.
    """

    name = "spring-mesh"
    separable = True

    def __init__(self, particles, springs, vel_decay=0.1):
        self.particles = tuple(particles)
        self.springs = tuple(springs)
        self.vel_decay = float(vel_decay)
        n = len(self.particles)
        seen = set()
        for s in self.springs:
            if not (0 <= s.a < n and 0 <= s.b < n) or s.a == s.b:
                raise ValueError(f"invalid spring endpoints ({s.a}, {s.b})")
            key = (min(s.a, s.b), max(s.a, s.b))
            if key in seen:
                raise ValueError(f"duplicate spring {key}")
            seen.add(key)
        self.n_particles = n
        self._a = np.array([s.a for s in self.springs], dtype=np.int64)
        self._b = np.array([s.b for s in self.springs], dtype=np.int64)
        self._rest = np.array([s.rest_length for s in self.springs], dtype=np.float64)
        self._k = np.array([s.spring_const for s in self.springs], dtype=np.float64)
        self.masses = np.array([p.mass for p in self.particles], dtype=np.float64)
        self.fixed_mask = np.array([p.is_fixed for p in self.particles], dtype=bool)
        self.rest_positions = np.array([p.position for p in self.particles], dtype=np.float64).reshape(n, 2)
        incidence = np.zeros((n, len(self.springs)))
        incidence[self._a, np.arange(len(self.springs))] = 1.0
        incidence[self._b, np.arange(len(self.springs))] = -1.0
        self._incidence = incidence

    @classmethod
    def grid(cls, n=10, spacing=1.0, vel_decay=0.1, spring_const=1.0, mass=1.0, fix_top_row=True):
        """``n x n`` grid with axis-aligned and both diagonal springs per square.

        Particle ``row * n + col`` sits at ``(col, row) * spacing``; the top row
        is ``row == n - 1``.
        """
        particles = []
        for row in range(n):
            for col in range(n):
                particles.append(
                    Particle(
                        position=(col * spacing, row * spacing),
                        mass=mass,
                        is_fixed=bool(fix_top_row and row == n - 1),
                    )
                )
        springs = []
        diag = spacing * np.sqrt(2.0)
        for row in range(n):
            for col in range(n):
                i = row * n + col
                if col + 1 < n:
                    springs.append(Spring(i, i + 1, spacing, spring_const))
                if row + 1 < n:
                    springs.append(Spring(i, i + n, spacing, spring_const))
                if row + 1 < n and col + 1 < n:
                    springs.append(Spring(i, i + n + 1, diag, spring_const))
                    springs.append(Spring(i + 1, i + n, diag, spring_const))
        return cls(particles, springs, vel_decay)

    @property
    def nq(self):
        return 2 * self.n_particles

    @property
    def dim(self):
        return 4 * self.n_particles

    def _split(self, x):
        x = np.asarray(x, dtype=np.float64)
        n = self.n_particles
        if x.shape[-1] != 4 * n:
            raise DimensionError(f"mesh state must have {4 * n} entries, got {x.shape[-1]}")
        q = x[..., : 2 * n].reshape(x.shape[:-1] + (n, 2))
        p = x[..., 2 * n :].reshape(x.shape[:-1] + (n, 2))
        return q, p

    def spring_forces(self, q):
        """Force on each spring's ``a`` endpoint, shape ``(..., n_springs, 2)``."""
        d = q[..., self._a, :] - q[..., self._b, :]
        length = np.sqrt(np.sum(d * d, axis=-1))
        if np.any(length == 0.0):
            raise SingularityError("coincident spring endpoints")
        scale = -self._k * (length - self._rest) / length
        return scale[..., None] * d

    def derivative(self, x):
        q, p = self._split(x)
        vel = p / self.masses[:, None]
        force = self._incidence @ self.spring_forces(q) - self.vel_decay * vel
        vel = np.where(self.fixed_mask[:, None], 0.0, vel)
        force = np.where(self.fixed_mask[:, None], 0.0, force)
        lead = np.asarray(x).shape[:-1]
        return np.concatenate(
            [vel.reshape(lead + (-1,)), force.reshape(lead + (-1,))], axis=-1
        )

    def energy(self, x):
        """Kinetic plus elastic energy."""
        q, p = self._split(x)
        kinetic = 0.5 * np.sum(np.sum(p * p, axis=-1) / self.masses, axis=-1)
        d = q[..., self._a, :] - q[..., self._b, :]
        stretch = np.sqrt(np.sum(d * d, axis=-1)) - self._rest
        return kinetic + 0.5 * np.sum(self._k * stretch**2, axis=-1)

    def total_momentum(self, x):
        _, p = self._split(x)
        return np.sum(p, axis=-2)

    def rest_state(self):
        return np.concatenate([self.rest_positions.ravel(), np.zeros(2 * self.n_particles)])

    def axis_aligned_edges(self):
        """Directed axis-aligned spring edges as a ``(2, N_e)`` int64 array."""
        pos = self.rest_positions
        pairs = []
        for s in self.springs:
            delta = pos[s.a] - pos[s.b]
            if np.count_nonzero(delta) == 1:
                pairs.append((s.a, s.b))
                pairs.append((s.b, s.a))
        if not pairs:
            return np.zeros((2, 0), dtype=np.int64)
        return np.array(pairs, dtype=np.int64).T.copy()

    def particle_defs(self, positions=None):
        pos = self.rest_positions if positions is None else np.asarray(positions).reshape(-1, 2)
        return [
            {"is_fixed": bool(p.is_fixed), "mass": float(p.mass), "position": [float(v) for v in xy]}
            for p, xy in zip(self.particles, pos)
        ]

    def spring_defs(self):
        return [
            {"a": int(s.a), "b": int(s.b), "rest_length": float(s.rest_length), "spring_const": float(s.spring_const)}
            for s in self.springs
        ]

    def system_args(self):
        return {"vel_decay": self.vel_decay}

    def metadata(self):
        return {
            "edges": self.spring_defs(),
            "particles": self.particle_defs(),
            "n_dim": 2,
            "n_grid": int(round(np.sqrt(self.n_particles))),
            "n_particles": self.n_particles,
            "vel_decay": self.vel_decay,
        }


def mesh_derivative(system: SpringMeshSystem, s: PhaseState) -> StateDerivative:
    n = system.n_particles
    if s.q.shape != (2 * n,) or s.p.shape != (2 * n,):
        raise DimensionError(f"mesh state must have q and p of length {2 * n}")
    out = system.derivative(np.concatenate([s.q, s.p]))
    return StateDerivative(out[: 2 * n], out[2 * n :])
