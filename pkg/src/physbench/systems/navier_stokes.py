"""Channel-flow scenes with circular obstacles for an external FEM solver.

Only scene construction lives here: obstacle sampling, the inflow profile and
the solver job document. Velocity/pressure fields are produced elsewhere and
ingested by :mod:`physbench.dataset_io.ns_ingest`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import SamplingExhaustedError

DOMAIN_WIDTH = 2.2
DOMAIN_HEIGHT = 0.41
SIDE_MARGIN = 0.25
WALL_MARGIN = 0.05
OBSTACLE_GAP = 0.05
MAX_OBSTACLE_ATTEMPTS = 1000
MAX_SCENE_RESTARTS = 100


@dataclass(frozen=True)
class Obstacle:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class NavierStokesScene:
    obstacles: tuple = ()
    viscosity: float = 0.001
    in_velocity: float = 1.5
    width: float = DOMAIN_WIDTH
    height: float = DOMAIN_HEIGHT
    grid_resolution: float = 0.01
    time_step_size: float = 0.08
    num_time_steps: int = 65

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def grid_shape(self):
        """``(ny, nx)`` sample counts of the regular output grid."""
        nx = int(round(self.width / self.grid_resolution)) + 1
        ny = int(round(self.height / self.grid_resolution)) + 1
        return ny, nx

    def vertices(self):
        """Grid points ``(N_p, 2)``, x varying fastest."""
        ny, nx = self.grid_shape
        xs = np.arange(nx, dtype=np.float64) * self.grid_resolution
        ys = np.arange(ny, dtype=np.float64) * self.grid_resolution
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def margin_violations(self):
        out = []
        for i, ob in enumerate(self.obstacles):
            (x, y), r = ob.center, ob.radius
            if x - r < SIDE_MARGIN - 1e-12 or x + r > self.width - SIDE_MARGIN + 1e-12:
                out.append(f"obstacle {i} violates side margin")
            if y - r < WALL_MARGIN - 1e-12 or y + r > self.height - WALL_MARGIN + 1e-12:
                out.append(f"obstacle {i} violates wall margin")
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                if _surface_gap(self.obstacles[i], self.obstacles[j]) < OBSTACLE_GAP - 1e-12:
                    out.append(f"obstacles {i} and {j} closer than {OBSTACLE_GAP}")
        return out


def _surface_gap(a: Obstacle, b: Obstacle) -> float:
    return float(np.hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]) - a.radius - b.radius)


def sample_obstacles(rng, count, radius_range, width=DOMAIN_WIDTH, height=DOMAIN_HEIGHT):
    """Rejection-sample ``count`` non-overlapping circles inside the channel.

    Each obstacle draws a radius, then a center from the margin-shrunk box.
    A candidate too close to an accepted circle is redrawn; after
    ``MAX_OBSTACLE_ATTEMPTS`` failures the whole scene restarts, and after
    ``MAX_SCENE_RESTARTS`` restarts :class:`SamplingExhaustedError` is raised.
    """
    if count not in (1, 4):
        raise ValueError(f"obstacle count must be 1 or 4, got {count}")
    r_lo, r_hi = map(float, radius_range)
    if not 0 < r_lo < r_hi:
        raise ValueError(f"invalid radius range {radius_range}")
    # no radius in range fits the box at all
    if width - 2 * SIDE_MARGIN < 2 * r_lo or height - 2 * WALL_MARGIN < 2 * r_lo:
        raise SamplingExhaustedError(f"radius range {radius_range} cannot fit the {width}x{height} domain")
    for _ in range(MAX_SCENE_RESTARTS):
        placed = []
        for _ in range(count):
            for _ in range(MAX_OBSTACLE_ATTEMPTS):
                r = rng.uniform(r_lo, r_hi)
                x_lo, x_hi = SIDE_MARGIN + r, width - SIDE_MARGIN - r
                y_lo, y_hi = WALL_MARGIN + r, height - WALL_MARGIN - r
                if x_lo > x_hi or y_lo > y_hi:
                    continue
                cand = Obstacle((rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)), r)
                if all(_surface_gap(cand, other) >= OBSTACLE_GAP for other in placed):
                    placed.append(cand)
                    break
            else:
                break
        if len(placed) == count:
            return tuple(placed)
    raise SamplingExhaustedError(
        f"could not place {count} obstacles with radii {radius_range} after {MAX_SCENE_RESTARTS} restarts"
    )


def inflow_profile(y, t, height=DOMAIN_HEIGHT):
    """Parabolic left-boundary velocity ramped up in time."""
    ux = 6.0 * (1.0 - np.exp(-5.0 * t)) * (height - y) * y / (height * height)
    return np.array([ux, 0.0])


def emit_solver_scene(scene: NavierStokesScene) -> str:
    """Serialize ``scene`` as the JSON job document for the external solver."""
    doc = {
        "mesh": [{"radius": ob.radius, "center": [ob.center[0], ob.center[1]]} for ob in scene.obstacles],
        "viscosity": float(scene.viscosity),
        "in_velocity": float(scene.in_velocity),
        "num_time_steps": int(scene.num_time_steps),
        "time_step_size": float(scene.time_step_size),
        "domain": {"width": float(scene.width), "height": float(scene.height)},
        "grid_resolution": float(scene.grid_resolution),
        "boundary_conditions": {
            "left": {
                "type": "dirichlet",
                "velocity": ["6*(1-exp(-5*t))*(H-y)*y/(H*H)", "0"],
                "H": float(scene.height),
            },
            "top": {"type": "dirichlet", "velocity": ["0", "0"]},
            "bottom": {"type": "dirichlet", "velocity": ["0", "0"]},
            "obstacles": {"type": "dirichlet", "velocity": ["0", "0"]},
            "right": {"type": "neumann", "traction": ["0", "0"]},
        },
        "initial_velocity": [0.0, 0.0],
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_solver_scene(text: str) -> NavierStokesScene:
    doc = json.loads(text)
    obstacles = tuple(Obstacle(tuple(m["center"]), m["radius"]) for m in doc["mesh"])
    domain = doc.get("domain", {})
    return NavierStokesScene(
        obstacles=obstacles,
        viscosity=doc["viscosity"],
        in_velocity=doc["in_velocity"],
        width=domain.get("width", DOMAIN_WIDTH),
        height=domain.get("height", DOMAIN_HEIGHT),
        grid_resolution=doc.get("grid_resolution", 0.01),
        time_step_size=doc["time_step_size"],
        num_time_steps=doc["num_time_steps"],
    )
