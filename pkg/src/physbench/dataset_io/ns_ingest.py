"""Turn externally solved Navier-Stokes snapshots into a dataset bundle.

The external solver is expected to write one directory per scene holding
``step_0000.npz``, ``step_0001.npz``, ... with arrays ``velocity`` of shape
``(N_p, 2)`` and ``pressure`` of shape ``(N_p,)``, sampled on the scene's
regular grid in :meth:`NavierStokesScene.vertices` order (x fastest). An
optional ``timing.json`` with a ``traj_gen_time`` entry records solver time.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import IngestError
from ..systems.navier_stokes import NavierStokesScene
from .bundle import DatasetBundle
from .npy import read_npz

DERIVATIVE_STENCIL = "central-2 interior, one-sided-2 endpoints"


def time_derivative(values, dt):
    """Second-order finite differences along axis 0.

    Central differences in the interior; one-sided three-point formulas at
    the ends. With two snapshots both ends use the plain forward difference.
    """
    u = np.asarray(values, dtype=np.float64)
    n = u.shape[0]
    out = np.zeros_like(u)
    if n == 1:
        return out
    if n == 2:
        out[:] = (u[1] - u[0]) / dt
        return out
    out[1:-1] = (u[2:] - u[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dt)
    out[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * dt)
    return out


def grid_edges(ny, nx):
    """Directed axis-aligned neighbor pairs of an ``ny x nx`` grid, shape ``(2, N_e)``."""
    idx = np.arange(ny * nx).reshape(ny, nx)
    horiz = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    fwd = np.concatenate([horiz, vert], axis=1)
    return np.ascontiguousarray(np.concatenate([fwd, fwd[::-1]], axis=1).astype(np.int64))


def scene_masks(scene: NavierStokesScene):
    """Return ``(boundary, obstacle)`` boolean masks over grid points.

    Boundary points are those on the Dirichlet walls (inflow, top, bottom);
    the outflow column is not fixed.
    """
    ny, nx = scene.grid_shape
    verts = scene.vertices()
    iy, ix = np.divmod(np.arange(ny * nx), nx)
    boundary = (ix == 0) | (iy == 0) | (iy == ny - 1)
    obstacle = np.zeros(ny * nx, dtype=bool)
    for ob in scene.obstacles:
        d = np.hypot(verts[:, 0] - ob.center[0], verts[:, 1] - ob.center[1])
        obstacle |= d <= ob.radius
    return boundary, obstacle


def load_solver_output(directory, scene: NavierStokesScene):
    """Read per-step solver files; returns ``(velocity (N_t,N_p,2), pressure (N_t,N_p))``."""
    directory = Path(directory)
    ny, nx = scene.grid_shape
    npts = ny * nx
    vel, pres = [], []
    for k in range(scene.num_time_steps):
        path = directory / f"step_{k:04d}.npz"
        if not path.is_file():
            raise IngestError(f"missing snapshot {path}")
        recs = read_npz(path)
        try:
            v, p = np.asarray(recs["velocity"], dtype=np.float64), np.asarray(recs["pressure"], dtype=np.float64)
        except KeyError as exc:
            raise IngestError(f"{path}: missing array {exc}") from None
        if v.shape != (npts, 2) or p.shape != (npts,):
            raise IngestError(f"{path}: fields of shape {v.shape}/{p.shape} do not match the {ny}x{nx} grid")
        vel.append(v)
        pres.append(p)
    return np.stack(vel), np.stack(pres)


def _ns_entry(i, scene, velocity, pressure, gen_time):
    prefix = f"traj_{i:05d}"
    dt = scene.time_step_size
    nt = velocity.shape[0]
    if nt != scene.num_time_steps:
        raise IngestError(f"expected {scene.num_time_steps} snapshots, got {nt}")
    ny, nx = scene.grid_shape
    boundary, obstacle = scene_masks(scene)
    fixed = boundary | obstacle
    records = {
        f"{prefix}_solutions": np.ascontiguousarray(velocity),
        f"{prefix}_pressures": np.ascontiguousarray(pressure),
        f"{prefix}_grads": time_derivative(velocity, dt),
        f"{prefix}_pressures_grads": time_derivative(pressure, dt),
        f"{prefix}_t": np.arange(nt, dtype=np.float64) * dt,
        f"{prefix}_edge_indices": grid_edges(ny, nx),
        f"{prefix}_vertices": scene.vertices(),
        f"{prefix}_fixed_mask": fixed,
        f"{prefix}_fixed_mask_solutions": np.repeat(fixed[:, None], 2, axis=1),
        f"{prefix}_fixed_mask_pressures": fixed.copy(),
        f"{prefix}_extra_fixed_mask": np.stack([fixed, obstacle], axis=1),
    }
    keys = {name[len(prefix) + 1 :]: name for name in records}
    keys.update(
        {
            "q": keys["pressures"],
            "p": keys["solutions"],
            "dqdt": keys["pressures_grads"],
            "dpdt": keys["grads"],
            "fixed_mask_q": keys["fixed_mask_pressures"],
            "fixed_mask_p": keys["fixed_mask_solutions"],
        }
    )
    traj_def = {
        "viscosity": scene.viscosity,
        "in_velocity": scene.in_velocity,
        "mesh": [{"radius": ob.radius, "center": list(ob.center)} for ob in scene.obstacles],
        "num_time_steps": nt,
        "time_step_size": dt,
        "subsample": 1,
    }
    entry = {
        "name": prefix,
        "num_time_steps": nt,
        "time_step_size": dt,
        "in_velocity": scene.in_velocity,
        "viscosity": scene.viscosity,
        "timing": {"traj_gen_time": float(gen_time)},
        "field_keys": keys,
    }
    return traj_def, entry, records


def ns_bundle(scenes, fields, gen_times=None) -> DatasetBundle:
    """Bundle already-loaded ``(velocity, pressure)`` pairs for each scene."""
    scenes = list(scenes)
    fields = list(fields)
    if len(scenes) != len(fields):
        raise IngestError("one field pair is needed per scene")
    gen_times = gen_times or [0.0] * len(scenes)
    resolution = scenes[0].grid_resolution if scenes else 0.01
    defs, entries, records = [], [], {}
    for i, (scene, (vel, pres), gt) in enumerate(zip(scenes, fields, gen_times)):
        if scene.grid_resolution != resolution:
            raise IngestError("all scenes must share one grid resolution")
        d, e, r = _ns_entry(i, scene, np.asarray(vel, dtype=np.float64), np.asarray(pres, dtype=np.float64), gt)
        defs.append(d)
        entries.append(e)
        records.update(r)
    metadata = {
        "grid_resolution": resolution,
        "viscosity": scenes[0].viscosity if scenes else None,
        "time_derivative_stencil": DERIVATIVE_STENCIL,
    }
    return DatasetBundle(
        "navier-stokes", {"grid_resolution": resolution, "trajectory_defs": defs}, metadata, entries, records
    )


def ingest_external_ns(output_dirs, scenes) -> DatasetBundle:
    """Load solver output directories (one per scene) into a bundle."""
    if isinstance(scenes, NavierStokesScene):
        scenes, output_dirs = [scenes], [output_dirs]
    fields, times = [], []
    for directory, scene in zip(output_dirs, scenes):
        fields.append(load_solver_output(directory, scene))
        timing = Path(directory) / "timing.json"
        times.append(json.loads(timing.read_text())["traj_gen_time"] if timing.is_file() else 0.0)
    return ns_bundle(scenes, fields, times)
