"""Seeded initial-condition sources with superset-preserving caches.

Every condition ``i`` is drawn from its own child stream
``SeedSequence(seed, spawn_key=(i,))`` of a PCG64 generator, so the ``i``-th
condition never depends on how many were requested before it. The cache
additionally guarantees that repeated draws return identical objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import PhaseState
from .systems.mesh import SpringMeshSystem
from .systems.navier_stokes import NavierStokesScene, sample_obstacles
from .systems.wave import wave_spline_pulse


def child_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def _uniform_upper_closed(rng, lo, hi):
    """Uniform on ``(lo, hi]``."""
    return hi - (hi - lo) * rng.random()


def _uniform_union(rng, intervals):
    """Uniform over a union of disjoint intervals, weighting each by its length."""
    lengths = np.array([hi - lo for lo, hi in intervals], dtype=np.float64)
    which = rng.choice(len(intervals), p=lengths / lengths.sum())
    lo, hi = intervals[which]
    return rng.uniform(lo, hi)


@dataclass(frozen=True)
class InitialCondition:
    index: int
    state: object
    params: dict = field(default_factory=dict)


class InitialConditionSource:
    """Base class: subclasses implement ``_sample(rng, index)``."""

    kind = None

    def __init__(self, seed: int, ood: bool = False):
        self.seed = int(seed)
        self.ood = bool(ood)
        self._cache: list[InitialCondition] = []

    def draw(self, n: int) -> list[InitialCondition]:
        if n < 1:
            raise ValueError("must draw at least one initial condition")
        while len(self._cache) < n:
            i = len(self._cache)
            state, params = self._sample(child_rng(self.seed, i), i)
            self._cache.append(InitialCondition(i, state, params))
        return list(self._cache[:n])

    def _sample(self, rng, index):
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "ood": self.ood}


class SpringICSource(InitialConditionSource):
    kind = "spring"

    def __init__(self, seed, ood=False, radius_range=None):
        super().__init__(seed, ood)
        self.radius_range = tuple(radius_range or ((1.0, 1.2) if ood else (0.2, 1.0)))

    def _sample(self, rng, index):
        r = _uniform_upper_closed(rng, *self.radius_range)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        state = PhaseState([r * np.sin(theta)], [r * np.cos(theta)])
        return state, {"radius": float(r), "theta": float(theta)}

    def describe(self):
        return {**super().describe(), "radius_range": list(self.radius_range)}


class WaveICSource(InitialConditionSource):
    kind = "wave"
    IN_RANGE = ((0.75, 1.25),)
    OOD_RANGES = ((0.5, 0.75), (1.25, 1.5))

    def __init__(self, seed, ood=False, n_grid=125, space_max=1.0, position=0.5, wave_speed=0.1):
        super().__init__(seed, ood)
        self.n_grid = int(n_grid)
        self.space_max = float(space_max)
        self.position = float(position)
        self.wave_speed = float(wave_speed)

    def _sample(self, rng, index):
        ranges = self.OOD_RANGES if self.ood else self.IN_RANGE
        width = _uniform_union(rng, ranges)
        height = _uniform_union(rng, ranges)
        q = wave_spline_pulse(width, height, self.n_grid, self.space_max, self.position)
        params = {"width": float(width), "height": float(height), "position": self.position}
        return PhaseState(q, np.zeros(self.n_grid)), params

    def describe(self):
        return {
            **super().describe(),
            "n_grid": self.n_grid,
            "space_max": self.space_max,
            "position": self.position,
            "wave_speed": self.wave_speed,
        }


class MeshICSource(InitialConditionSource):
    kind = "spring-mesh"

    def __init__(self, seed, ood=False, n_grid=10, vel_decay=0.1, radius=0.35, outer_radius=0.45):
        super().__init__(seed, ood)
        self.n_grid = int(n_grid)
        self.vel_decay = float(vel_decay)
        self.radius = float(radius)
        self.outer_radius = float(outer_radius)
        self.system = SpringMeshSystem.grid(self.n_grid, vel_decay=self.vel_decay)

    def _sample(self, rng, index):
        sys_ = self.system
        n = sys_.n_particles
        u = rng.random(n)
        angle = rng.uniform(0.0, 2.0 * np.pi, n)
        if self.ood:
            r1, r2 = self.radius, self.outer_radius
            rad = np.sqrt(r1 * r1 + (r2 * r2 - r1 * r1) * (1.0 - u))
        else:
            # area-uniform disk
            rad = self.radius * np.sqrt(u)
        offset = np.stack([rad * np.cos(angle), rad * np.sin(angle)], axis=1)
        offset[sys_.fixed_mask] = 0.0
        q = (sys_.rest_positions + offset).ravel()
        return PhaseState(q, np.zeros(2 * n)), {}

    def describe(self):
        return {
            **super().describe(),
            "n_grid": self.n_grid,
            "vel_decay": self.vel_decay,
            "radius": self.radius,
            "outer_radius": self.outer_radius,
        }


class NSSceneSource(InitialConditionSource):
    kind = "navier-stokes"

    def __init__(self, seed, ood=False, obstacle_count=1, viscosity=0.001, in_velocity=1.5):
        super().__init__(seed, ood)
        if obstacle_count not in (1, 4):
            raise ValueError("obstacle_count must be 1 or 4")
        self.obstacle_count = obstacle_count
        self.viscosity = float(viscosity)
        self.in_velocity = float(in_velocity)

    @property
    def radius_range(self):
        return (0.025, 0.05) if self.ood else (0.05, 0.1)

    def _sample(self, rng, index):
        obstacles = sample_obstacles(rng, self.obstacle_count, self.radius_range)
        scene = NavierStokesScene(obstacles, viscosity=self.viscosity, in_velocity=self.in_velocity)
        return scene, {}

    def describe(self):
        return {
            **super().describe(),
            "obstacle_count": self.obstacle_count,
            "viscosity": self.viscosity,
            "in_velocity": self.in_velocity,
        }


SOURCES = {cls.kind: cls for cls in (SpringICSource, WaveICSource, MeshICSource, NSSceneSource)}


def source_from_description(desc: dict) -> InitialConditionSource:
    desc = dict(desc)
    cls = SOURCES[desc.pop("kind")]
    return cls(**desc)


def spring_ics(source: SpringICSource, n: int) -> list[PhaseState]:
    return [ic.state for ic in source.draw(n)]


def wave_ics(source: WaveICSource, n: int) -> list[PhaseState]:
    return [ic.state for ic in source.draw(n)]


def mesh_ics(source: MeshICSource, n: int) -> list[PhaseState]:
    return [ic.state for ic in source.draw(n)]


def ns_ics(source: NSSceneSource, n: int) -> list[NavierStokesScene]:
    return [ic.state for ic in source.draw(n)]
