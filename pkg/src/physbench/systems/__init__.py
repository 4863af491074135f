"""The four benchmark systems."""

from .mesh import Particle, Spring, SpringMeshSystem, mesh_derivative
from .navier_stokes import (
    NavierStokesScene,
    Obstacle,
    emit_solver_scene,
    inflow_profile,
    parse_solver_scene,
    sample_obstacles,
)
from .spring import SpringSystem, spring_closed_form, spring_closed_form_states, spring_derivative
from .wave import WaveSystem, periodic_laplacian, spline_kernel, wave_derivative, wave_spline_pulse

SYSTEM_KINDS = ("spring", "wave", "spring-mesh", "navier-stokes")

__all__ = [
    "SYSTEM_KINDS",
    "NavierStokesScene",
    "Obstacle",
    "Particle",
    "Spring",
    "SpringMeshSystem",
    "SpringSystem",
    "WaveSystem",
    "emit_solver_scene",
    "inflow_profile",
    "mesh_derivative",
    "parse_solver_scene",
    "periodic_laplacian",
    "sample_obstacles",
    "spline_kernel",
    "spring_closed_form",
    "spring_closed_form_states",
    "spring_derivative",
    "wave_derivative",
    "wave_spline_pulse",
]
