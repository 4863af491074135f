import json

import numpy as np
import pytest

from physbench.dataset_io import (
    grid_edges,
    ingest_external_ns,
    ns_bundle,
    read_bundle,
    scene_masks,
    time_derivative,
    validate_bundle,
    write_bundle,
    write_npz,
)
from physbench.errors import IngestError
from physbench.systems import NavierStokesScene, Obstacle


def small_scene(**kw):
    base = dict(obstacles=(Obstacle((0.1, 0.05), 0.02),), width=0.3, height=0.1, grid_resolution=0.05,
                num_time_steps=5)
    base.update(kw)
    return NavierStokesScene(**base)


def test_constant_field_has_zero_derivative():
    u = np.tile(np.array([[1.0, -2.0]]), (6, 1))
    assert np.array_equal(time_derivative(u, 0.08), np.zeros_like(u))


@pytest.mark.parametrize("n", [2, 3, 7])
def test_linear_field_derivative_is_exact(n):
    t = np.arange(n) * 0.08
    a = np.array([0.5, -3.0])
    u = t[:, None] * a[None, :]
    assert np.allclose(time_derivative(u, 0.08), np.tile(a, (n, 1)), atol=1e-12)


def test_quadratic_interior_and_endpoint_stencils():
    t = np.arange(5) * 0.1
    d = time_derivative(t**2, 0.1)
    assert np.allclose(d, 2 * t, atol=1e-12)  # both stencils are exact for quadratics


def test_grid_edges_are_directed_neighbors():
    e = grid_edges(2, 3)
    assert e.shape == (2, 14) and e.dtype == np.int64
    pairs = set(map(tuple, e.T))
    assert (0, 1) in pairs and (1, 0) in pairs and (0, 3) in pairs and (3, 0) in pairs
    assert (0, 4) not in pairs
    ny, nx = NavierStokesScene().grid_shape
    assert grid_edges(ny, nx).shape[1] == 2 * (ny * (nx - 1) + (ny - 1) * nx)


def test_masks():
    scene = small_scene()
    boundary, obstacle = scene_masks(scene)
    ny, nx = scene.grid_shape
    b = boundary.reshape(ny, nx)
    assert b[0].all() and b[-1].all() and b[:, 0].all()
    assert not b[1:-1, -1].any()  # outflow column is free
    verts = scene.vertices()
    assert obstacle.any()
    assert np.all(np.hypot(verts[obstacle, 0] - 0.1, verts[obstacle, 1] - 0.05) <= 0.02)


def fields(scene, rate=1.0):
    ny, nx = scene.grid_shape
    t = np.arange(scene.num_time_steps) * scene.time_step_size
    vel = np.zeros((len(t), ny * nx, 2)) + rate * t[:, None, None]
    pres = np.ones((len(t), ny * nx)) * 3.0
    return vel, pres


def test_bundle_channels_are_typed():
    scene = NavierStokesScene(num_time_steps=3)
    vel = np.zeros((3, 9282, 2))
    pres = np.zeros((3, 9282))
    b = ns_bundle([scene], [(vel, pres)])
    assert validate_bundle(b) == []
    assert b.channel(0, "solutions").shape == (3, 9282, 2)
    assert b.channel(0, "pressures").shape == (3, 9282)
    assert b.channel(0, "vertices").shape == (9282, 2)
    extra = b.channel(0, "extra_fixed_mask")
    assert extra.shape == (9282, 2) and extra.dtype == bool
    assert np.array_equal(extra[:, 0], b.channel(0, "fixed_mask"))
    keys = b.trajectories[0]["field_keys"]
    assert keys["q"] == keys["pressures"] and keys["dpdt"] == keys["grads"]


def test_full_length_time_channel():
    scene = NavierStokesScene(width=0.1, height=0.1, grid_resolution=0.05)
    vel, pres = fields(scene)
    t = ns_bundle([scene], [(vel, pres)]).channel(0, "t")
    assert len(t) == 65 and t[0] == 0.0 and t[-1] == pytest.approx(5.12)


def write_solver_dir(path, scene, vel, pres, gen_time=None):
    path.mkdir()
    for k in range(len(vel)):
        write_npz(path / f"step_{k:04d}.npz", {"velocity": vel[k], "pressure": pres[k]})
    if gen_time is not None:
        (path / "timing.json").write_text(json.dumps({"traj_gen_time": gen_time}))


def test_ingest_from_solver_directories(tmp_path):
    scenes = [small_scene(), small_scene(obstacles=(Obstacle((0.2, 0.05), 0.03),))]
    dirs = []
    for i, s in enumerate(scenes):
        vel, pres = fields(s, rate=0.5)
        write_solver_dir(tmp_path / f"s{i}", s, vel, pres, gen_time=1.5 + i)
        dirs.append(tmp_path / f"s{i}")
    b = ingest_external_ns(dirs, scenes)
    assert len(b) == 2 and validate_bundle(b) == []
    assert np.allclose(b.channel(0, "grads"), 0.5)
    assert np.array_equal(b.channel(0, "pressures_grads"), np.zeros((5, len(scenes[0].vertices()))))
    assert b.trajectories[1]["timing"]["traj_gen_time"] == 2.5
    write_bundle(b, tmp_path / "bundle")
    back = read_bundle(tmp_path / "bundle")
    assert back.system_args["trajectory_defs"][1]["mesh"][0]["radius"] == 0.03


def test_missing_snapshot_and_grid_mismatch(tmp_path):
    s = small_scene()
    vel, pres = fields(s)
    write_solver_dir(tmp_path / "short", s, vel[:3], pres[:3])
    with pytest.raises(IngestError, match="missing snapshot"):
        ingest_external_ns(tmp_path / "short", s)
    write_solver_dir(tmp_path / "wrong", s, vel[:, :-1], pres[:, :-1])
    with pytest.raises(IngestError, match="do not match"):
        ingest_external_ns(tmp_path / "wrong", s)
    with pytest.raises(IngestError):
        ns_bundle([s], [])
