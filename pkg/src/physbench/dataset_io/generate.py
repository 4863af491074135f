"""Build dataset bundles from simulated trajectories, and read them back as trajectories."""

from __future__ import annotations

import time

import numpy as np

from ..domain import TimeGrid, Trajectory
from ..integrators import IntegratorKind, integrate_batch
from ..systems import Particle, Spring, SpringMeshSystem, SpringSystem, WaveSystem
from .bundle import DatasetBundle


def _name(i):
    return f"traj_{i:05d}"


def _grid_entry(grid: TimeGrid):
    return {"num_time_steps": grid.count, "time_step_size": grid.step, "subsample": grid.subsample}


def _traj_entry(i, tr: Trajectory, extra=None):
    entry = {"name": _name(i), "num_time_steps": tr.grid.count, "time_step_size": tr.grid.step}
    entry.update(extra or {})
    entry["timing"] = {"traj_gen_time": float(tr.gen_time_seconds)}
    return entry


def _state_records(prefix, tr: Trajectory, shape):
    nt = len(tr)
    recs = {
        f"{prefix}_q": np.ascontiguousarray(tr.q.reshape((nt,) + shape)),
        f"{prefix}_p": np.ascontiguousarray(tr.p.reshape((nt,) + shape)),
        f"{prefix}_dqdt": np.ascontiguousarray(tr.dqdt.reshape((nt,) + shape)),
        f"{prefix}_dpdt": np.ascontiguousarray(tr.dpdt.reshape((nt,) + shape)),
        f"{prefix}_t": tr.grid.times(),
    }
    keys = {c: f"{prefix}_{c}" for c in ("q", "p", "dqdt", "dpdt", "t")}
    return recs, keys


def spring_bundle(trajectories) -> DatasetBundle:
    defs, entries, records = [], [], {}
    for i, tr in enumerate(trajectories):
        defs.append({"initial_condition": {"q": float(tr.q[0, 0]), "p": float(tr.p[0, 0])}, **_grid_entry(tr.grid)})
        recs, keys = _state_records(_name(i), tr, (1,))
        records.update(recs)
        entry = _traj_entry(i, tr)
        entry["field_keys"] = keys
        entries.append(entry)
    return DatasetBundle("spring", {"trajectory_defs": defs}, SpringSystem().metadata(), entries, records)


def wave_bundle(system: WaveSystem, trajectories, pulse_params) -> DatasetBundle:
    defs, entries, records = [], [], {}
    for i, (tr, pulse) in enumerate(zip(trajectories, pulse_params)):
        defs.append(
            {
                "wave_speed": system.wave_speed,
                "start_type": "cubic_splines",
                "start_type_args": {
                    "height": float(pulse["height"]),
                    "width": float(pulse["width"]),
                    "position": float(pulse["position"]),
                },
                **_grid_entry(tr.grid),
            }
        )
        recs, keys = _state_records(_name(i), tr, (system.n_grid,))
        records.update(recs)
        entry = _traj_entry(i, tr, {"wave_speed": system.wave_speed})
        entry["field_keys"] = keys
        entries.append(entry)
    args = {**system.system_args(), "trajectory_defs": defs}
    return DatasetBundle("wave", args, system.metadata(), entries, records)


def mesh_bundle(system: SpringMeshSystem, trajectories) -> DatasetBundle:
    n = system.n_particles
    defs, entries, records = [], [], {}
    for i, tr in enumerate(trajectories):
        prefix = _name(i)
        defs.append(
            {
                "particles": system.particle_defs(tr.q[0]),
                "springs": system.spring_defs(),
                **_grid_entry(tr.grid),
            }
        )
        recs, keys = _state_records(prefix, tr, (n, 2))
        mask = system.fixed_mask.copy()
        recs.update(
            {
                f"{prefix}_edge_indices": system.axis_aligned_edges(),
                f"{prefix}_masses": system.masses.copy(),
                f"{prefix}_fixed_mask": mask,
                f"{prefix}_fixed_mask_q": np.repeat(mask[:, None], 2, axis=1),
            }
        )
        keys.update(
            {
                "edge_indices": f"{prefix}_edge_indices",
                "masses": f"{prefix}_masses",
                "fixed_mask": f"{prefix}_fixed_mask",
                "fixed_mask_q": f"{prefix}_fixed_mask_q",
                "fixed_mask_p": f"{prefix}_fixed_mask_q",
                "extra_fixed_mask": f"{prefix}_fixed_mask",
            }
        )
        records.update(recs)
        entry = _traj_entry(i, tr)
        entry["field_keys"] = keys
        entries.append(entry)
    args = {**system.system_args(), "trajectory_defs": defs}
    return DatasetBundle("spring-mesh", args, system.metadata(), entries, records)


def generate_bundle(kind, source, n, grid: TimeGrid, integrator="leapfrog", system=None, cfg=None):
    """Draw ``n`` initial conditions from ``source`` and simulate them.

    Spring, wave and spring-mesh only; Navier-Stokes data is ingested from an
    external solver instead (see :mod:`physbench.dataset_io.ns_ingest`).
    """
    ics = source.draw(n)
    if kind == "spring":
        system = system or SpringSystem()
    elif kind == "wave":
        system = system or WaveSystem(source.n_grid, source.space_max, source.wave_speed)
    elif kind == "spring-mesh":
        system = system or source.system
    else:
        raise ValueError(f"cannot simulate system kind {kind!r} locally")
    x0 = np.stack([np.concatenate([ic.state.q, ic.state.p]) for ic in ics])
    start = time.perf_counter()
    states, derivs, _ = integrate_batch(system, IntegratorKind.parse(integrator), x0, grid, cfg)
    per = (time.perf_counter() - start) / n
    trajs = [Trajectory(grid, states[:, i], derivs[:, i], nq=system.nq, gen_time_seconds=per) for i in range(n)]
    if kind == "spring":
        return spring_bundle(trajs)
    if kind == "wave":
        return wave_bundle(system, trajs, [ic.params for ic in ics])
    return mesh_bundle(system, trajs)


def bundle_trajectories(bundle: DatasetBundle) -> list[Trajectory]:
    """Packed-state trajectories for every entry of ``bundle``.

    For Navier-Stokes the position slot holds pressures and the momentum
    slot holds the flattened velocities.
    """
    out = []
    defs = bundle.system_args.get("trajectory_defs", [])
    for i, entry in enumerate(bundle.trajectories):
        nt = entry["num_time_steps"]
        subsample = defs[i].get("subsample", 1) if i < len(defs) else 1
        grid = TimeGrid(entry["time_step_size"], nt, subsample)
        q = bundle.channel(i, "q").reshape(nt, -1)
        p = bundle.channel(i, "p").reshape(nt, -1)
        dq = bundle.channel(i, "dqdt").reshape(nt, -1)
        dp = bundle.channel(i, "dpdt").reshape(nt, -1)
        out.append(
            Trajectory(
                grid,
                np.concatenate([q, p], axis=1),
                np.concatenate([dq, dp], axis=1),
                nq=q.shape[1],
                gen_time_seconds=entry["timing"]["traj_gen_time"],
            )
        )
    return out


def bundle_fixed_mask(bundle: DatasetBundle, index: int = 0):
    """Per-point fixed mask for systems that carry one, else ``None``."""
    if bundle.system in ("spring-mesh", "navier-stokes"):
        return np.asarray(bundle.channel(index, "fixed_mask"))
    return None


def system_from_bundle(bundle: DatasetBundle):
    """Reconstruct the simulated system from stored arguments (not Navier-Stokes)."""
    if bundle.system == "spring":
        return SpringSystem()
    if bundle.system == "wave":
        defs = bundle.system_args["trajectory_defs"]
        speed = defs[0]["wave_speed"] if defs else 0.1
        return WaveSystem(bundle.system_args["n_grid"], bundle.system_args["space_max"], speed)
    if bundle.system == "spring-mesh":
        # metadata holds the rest geometry; trajectory_defs hold perturbed positions
        meta = bundle.metadata
        particles = [Particle(tuple(p["position"]), p["mass"], p["is_fixed"]) for p in meta["particles"]]
        springs = [Spring(s["a"], s["b"], s["rest_length"], s["spring_const"]) for s in meta["edges"]]
        return SpringMeshSystem(particles, springs, bundle.system_args["vel_decay"])
    raise ValueError(f"no local system for {bundle.system!r}")
