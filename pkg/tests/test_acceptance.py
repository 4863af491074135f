"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line; the lines are repeated
in an "acceptance criteria" section of the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from physbench.dataset_io import (
    bundle_trajectories,
    bundles_equal,
    generate_bundle,
    ns_bundle,
    read_bundle,
    validate_bundle,
    write_bundle,
)
from physbench.domain import TimeGrid, Trajectory
from physbench.evaluation import (
    RolloutResult,
    rollout_derivative_batch,
    rollout_step,
    scaling_factor,
    step_weights,
    timing_protocol,
)
from physbench.integrators import integrate, integrate_batch
from physbench.learners import MlpModel, RandomFeatureModel, TrainConfig, knn_fit, mlp_gradients, mlp_train, rf_fit
from physbench.sampling import MeshICSource, SpringICSource, WaveICSource
from physbench.systems import NavierStokesScene, Obstacle, SpringMeshSystem, SpringSystem, WaveSystem
from physbench.systems import spring_closed_form_states, wave_spline_pulse
from physbench.systems.wave import spline_kernel

pytestmark = pytest.mark.acceptance

SPRING_GRID = TimeGrid(0.00781, 805, 128)
TRAIN_SEED, EVAL_SEED = 0, 1


@pytest.fixture(scope="session")
def spring_train_bundle():
    return generate_bundle("spring", SpringICSource(TRAIN_SEED), 1000, SPRING_GRID, "leapfrog")


@pytest.fixture(scope="session")
def spring_train(spring_train_bundle):
    return bundle_trajectories(spring_train_bundle)


@pytest.fixture(scope="session")
def spring_eval():
    return bundle_trajectories(generate_bundle("spring", SpringICSource(EVAL_SEED), 30, SPRING_GRID, "leapfrog"))


def _median_rollout_mse(model, evals):
    x0 = np.stack([tr.states[0] for tr in evals])
    results = rollout_derivative_batch(model, "leapfrog", x0, len(evals[0]), evals[0].grid.step, 1, evals)
    return float(np.median([r.trajectory_mse for r in results]))


def _order_slope(kind):
    x0 = np.array([0.0, 1.0])
    dts, errs = [], []
    for j in range(4, 11):
        n = 2**j
        tr = integrate(SpringSystem(), kind, x0, TimeGrid(2 * np.pi / n, n + 1, 1))
        dts.append(2 * np.pi / n)
        errs.append(np.linalg.norm(tr.states[-1] - x0))
    return float(np.polyfit(np.log(dts), np.log(errs), 1)[0])


@pytest.mark.acceptance(number=1, title="integrator convergence orders")
def test_integrator_orders(criterion):
    targets = {"euler": (1.0, 0.2), "leapfrog": (2.0, 0.2), "rk4": (4.0, 0.3), "backward-euler": (1.0, 0.2),
               "bdf2": (2.0, 0.2)}
    start = time.perf_counter()
    slopes = {kind: _order_slope(kind) for kind in targets}
    elapsed = time.perf_counter() - start
    ok = all(abs(slopes[k] - want) <= tol for k, (want, tol) in targets.items()) and elapsed < 5.0
    detail = ", ".join(f"{k} {s:.3f}" for k, s in slopes.items())
    criterion(ok, f"{detail}; {elapsed:.2f}s (limit 5s)")


@pytest.mark.acceptance(number=2, title="spring leapfrog ground truth vs closed form")
def test_spring_ground_truth(criterion, spring_eval):
    worst = 0.0
    for tr in spring_eval:
        exact = spring_closed_form_states(tr.states[0], tr.grid.times())
        worst = max(worst, float(np.mean((tr.states - exact) ** 2)))
    criterion(worst <= 1e-8, f"worst trajectory MSE {worst:.3e} over {len(spring_eval)} trajectories (limit 1e-8)")


@pytest.mark.acceptance(number=3, title="wave translation oracle")
def test_wave_translation(criterion):
    n, speed = 125, 0.1
    system = WaveSystem(n, 1.0, speed)
    pulses = [(1.0, 1.0), (0.8, 1.2), (1.25, 0.75)]
    x0 = np.stack([np.concatenate([wave_spline_pulse(w, h, n), np.zeros(n)]) for w, h in pulses])
    grid = TimeGrid(0.00049, 10204, 8)
    start = time.perf_counter()
    states, _, _ = integrate_batch(system, "leapfrog", x0, grid)
    elapsed = time.perf_counter() - start
    x = np.arange(n) / n
    dist = np.minimum(np.abs(x - 0.0), 1.0 - np.abs(x - 0.0))  # pulse shifted by 0.5 wraps to x = 0
    errors = []
    for i, (w, h) in enumerate(pulses):
        expected = spline_kernel((10.0 / w) * dist, h)
        errors.append(float(np.linalg.norm(states[-1, i, :n] - expected) / np.linalg.norm(expected)))
    ok = max(errors) <= 1e-2 and elapsed < 60.0
    criterion(ok, f"max relative L2 error {max(errors):.2e} (limit 1e-2) at t={grid.final_time:.4f}; "
                  f"{elapsed:.1f}s for {len(pulses)} pulses (limit 60s)")


def _free_mesh_state(system, rng):
    x = system.rest_state()
    n = system.n_particles
    x[: 2 * n] += rng.uniform(-0.2, 0.2, 2 * n)
    x[2 * n :] = rng.normal(0.0, 0.3, 2 * n)
    return x


@pytest.mark.acceptance(number=4, title="spring-mesh momentum and energy")
def test_mesh_conservation(criterion):
    rng = np.random.default_rng(4)
    grid = TimeGrid(0.00781, 1001, 128)  # 1000 stored steps at the fine inner stride
    free = SpringMeshSystem.grid(10, vel_decay=0.0, fix_top_row=False)
    states, _, _ = integrate_batch(free, "rk4", _free_mesh_state(free, rng)[None], grid)
    momentum = free.total_momentum(states[:, 0])
    drift = float(np.max(np.abs(momentum - momentum[0])))
    damped = SpringMeshSystem.grid(10, vel_decay=0.1, fix_top_row=False)
    states, _, _ = integrate_batch(damped, "rk4", _free_mesh_state(damped, rng)[None], grid)
    energy = damped.energy(states[:, 0])
    rise = float(np.max(np.diff(energy)))
    ok = drift <= 1e-9 and rise <= 0.0
    criterion(ok, f"momentum drift {drift:.2e} (limit 1e-9); largest energy change per stored step {rise:.2e} "
                  f"(must be <= 0), energy {energy[0]:.3f} -> {energy[-1]:.3f}")


@pytest.mark.acceptance(number=5, title="KNN step replay is exact")
def test_knn_replay(criterion, spring_train):
    model = knn_fit(spring_train, "step")
    picks = [0, 1, 499, 998, 999]
    mses = [rollout_step(model, spring_train[i]).trajectory_mse for i in picks]
    criterion(all(m == 0.0 for m in mses), f"replay MSE {max(mses)!r} for training trajectories {picks}")


def _extended_precision_loss(params, depth, X, Y):
    """Batch MSE evaluated in long double, so finite differences at h=1e-6 stay above rounding noise."""
    H = X.astype(np.longdouble)
    for i in range(depth):
        H = H @ params[i] + params[depth + i]
        if i < depth - 1:
            H = np.tanh(H)
    resid = H - Y
    return np.mean(resid * resid)


@pytest.mark.acceptance(number=6, title="MLP gradient check")
def test_gradient_check(criterion):
    rng = np.random.default_rng(6)
    model = MlpModel.create(4, 3, 3, 16, seed=6)
    h = np.longdouble(1e-6)
    worst = 0.0
    for _ in range(10):
        X, Y = rng.standard_normal((8, 4)), rng.standard_normal((8, 3))
        _, grads = mlp_gradients(model, (X, Y))
        params = [p.astype(np.longdouble) for p in model.parameters()]
        for pi, g in enumerate(grads):
            for idx in np.ndindex(g.shape):
                shifted = []
                for sign in (1, -1):
                    trial = [q.copy() for q in params]
                    trial[pi][idx] += sign * h
                    shifted.append(_extended_precision_loss(trial, model.depth, X, Y))
                fd = float((shifted[0] - shifted[1]) / (2 * h))
                scale = max(abs(fd), abs(g[idx]))
                worst = max(worst, abs(fd - g[idx]) / scale if scale > 0 else 0.0)
    criterion(worst <= 1e-5, f"max relative error {worst:.2e} over 10 batches (limit 1e-5, "
                             f"long double eps {np.finfo(np.longdouble).eps:.1e})")


@pytest.mark.acceptance(number=7, title="random-feature ridge interpolation")
def test_kernel_interpolation(criterion, spring_train):
    rng = np.random.default_rng(7)
    states = np.concatenate([tr.states for tr in spring_train[:50]])
    derivs = np.concatenate([tr.derivatives for tr in spring_train[:50]])
    pick = rng.choice(len(states), 100, replace=False)
    X, Y = states[pick], derivs[pick]
    sizes = [100, 128, 256, 512, 1024, 2048]
    residuals, svd_residuals = [], []
    for L in sizes:
        model = rf_fit(RandomFeatureModel.create(2, 2, L, seed=7), X, Y, ridge=1e-10)
        residuals.append(float(np.mean((model.predict(X) - Y) ** 2)))
        # independent SVD evaluation of the same ridge residual
        u, sv, _ = np.linalg.svd(model.features(X), full_matrices=False)
        coeff = u.T @ Y
        svd_resid = u @ ((1e-10 / (sv**2 + 1e-10))[:, None] * coeff) + (Y - u @ coeff)
        svd_residuals.append(float(np.mean(svd_resid**2)))
    monotone = all(a >= b for a, b in zip(residuals, residuals[1:]))
    ok = max(residuals) <= 1e-6 and monotone
    detail = ", ".join(f"L={L}: {r:.1e}" for L, r in zip(sizes, residuals))
    agree = max(abs(a - b) / b for a, b in zip(residuals, svd_residuals))
    criterion(ok, f"training residual MSE {detail} (limit 1e-6, non-increasing: {monotone}; "
                  f"SVD cross-check max relative difference {agree:.1e})")


def _tiny_ns_bundle():
    scene = NavierStokesScene((Obstacle((0.3, 0.2), 0.06),), width=0.6, height=0.41, grid_resolution=0.05,
                              num_time_steps=4)
    npts = len(scene.vertices())
    t = np.arange(4)[:, None]
    vel = np.stack([np.full((npts, 2), 0.1) * k for k in range(4)])
    pres = np.ones((4, npts)) * t
    return ns_bundle([scene], [(vel, pres)])


@pytest.mark.acceptance(number=8, title="dataset format round trip and superset")
def test_format_round_trip(criterion, spring_train_bundle, tmp_path):
    bundles = {
        "spring-1000": spring_train_bundle,
        "wave": generate_bundle("wave", WaveICSource(0), 2, TimeGrid(0.00049, 50, 8)),
        "spring-mesh": generate_bundle("spring-mesh", MeshICSource(0), 2, TimeGrid(0.00781, 20, 8), "rk4"),
        "navier-stokes": _tiny_ns_bundle(),
    }
    problems = []
    for name, bundle in bundles.items():
        if validate_bundle(bundle):
            problems.append(f"{name} invalid")
        write_bundle(bundle, tmp_path / name / "a")
        back = read_bundle(tmp_path / name / "a")
        write_bundle(back, tmp_path / name / "b")
        for f in ("system_meta.json", "trajectories.npz"):
            if (tmp_path / name / "a" / f).read_bytes() != (tmp_path / name / "b" / f).read_bytes():
                problems.append(f"{name}/{f} differs")
        if not bundles_equal(bundle, back):
            problems.append(f"{name} read differs")
    # each size comes from its own fresh source, as separate data_gen runs would
    big = spring_train_bundle
    for n in (10, 500):
        small = generate_bundle("spring", SpringICSource(TRAIN_SEED), n, SPRING_GRID, "leapfrog")
        if validate_bundle(small):
            problems.append(f"spring-{n} invalid")
        for i in range(n):
            for channel in ("q", "p", "dqdt", "dpdt", "t"):
                if small.channel(i, channel).tobytes() != big.channel(i, channel).tobytes():
                    problems.append(f"spring-{n} trajectory {i} {channel} differs from spring-1000")
                    break
    criterion(not problems, "; ".join(problems[:5]) or
              f"{len(bundles)} systems byte-identical after rewrite, all valid; 10 < 500 < 1000 element-exact")


@pytest.mark.acceptance(number=9, title="weighted error endpoints")
def test_weights(criterion):
    w = step_weights(805)
    ok = w[0] == 1.0 and w[-1] == 0.01 and w[0] / w[-1] == 100.0
    criterion(ok, f"weight(0)={w[0]!r}, weight(1)={w[-1]!r}, ratio={w[0] / w[-1]!r}")


def _synthetic_result(reference, learned_error):
    per_step = np.full(len(reference) - 1, learned_error)
    return RolloutResult(reference, reference, per_step, float(learned_error), None, np.full(1, 1e-6))


@pytest.mark.acceptance(number=10, title="timing protocol crossings")
def test_timing_protocol(criterion):
    x0 = np.array([0.3, 0.8])
    grid = TimeGrid(0.1, 33, 1)
    exact = spring_closed_form_states(x0, grid.times())
    reference = Trajectory(grid, exact, SpringSystem().derivative(exact), nq=1)
    max_power = 8
    errs = []
    for j in range(max_power + 1):
        fine = TimeGrid(0.1 / 2**j, 32 * 2**j + 1, 1)
        errs.append(float(np.mean((integrate(SpringSystem(), "euler", x0, fine).states[-1] - exact[-1]) ** 2)))
    learned, expected = [], []
    for j in range(max_power):
        learned.append(math.sqrt(errs[j] * errs[j + 1]))
        expected.append(2 ** (j + 1))
    learned += [math.inf, 0.0]
    expected += [1, None]
    report = timing_protocol(SpringSystem(), "euler", [_synthetic_result(reference, e) for e in learned],
                             max_power=max_power)
    sweep = np.logspace(math.log10(errs[-1]) - 1, math.log10(errs[0]) + 1, 200)
    swept = [scaling_factor(errs, e) for e in sweep]
    rank = [math.inf if s is None else s for s in swept]
    monotone = all(a >= b for a, b in zip(rank, rank[1:]))
    ok = list(report.scalings) == expected and monotone
    criterion(ok, f"reported {list(report.scalings)} expected {expected}; monotone over 200 learned errors: {monotone}")


@pytest.mark.acceptance(number=11, title="KNN error falls with training size")
def test_knn_trend(criterion, spring_train, spring_eval):
    start = time.perf_counter()
    medians = {}
    for n in (10, 100, 1000):
        medians[n] = _median_rollout_mse(knn_fit(spring_train[:n], "derivative"), spring_eval)
    elapsed = time.perf_counter() - start
    values = [medians[n] for n in (10, 100, 1000)]
    ok = values[0] > values[1] > values[2] and elapsed < 120.0
    detail = ", ".join(f"n={n}: {m:.2e}" for n, m in medians.items())
    criterion(ok, f"median rollout MSE {detail}; {elapsed:.1f}s (limit 120s)")


@pytest.mark.acceptance(number=12, title="KNN competitive in the narrow regime")
def test_knn_vs_mlp(criterion, spring_train, spring_eval):
    knn = _median_rollout_mse(knn_fit(spring_train, "derivative"), spring_eval)
    cfg = TrainConfig(epochs=200, batch_size=256, sample_stride=16, seed=0)
    start = time.perf_counter()
    mlp, _ = mlp_train(MlpModel.create(2, 2, 3, 64, seed=0, nq=1), spring_train, "derivative", cfg)
    elapsed = time.perf_counter() - start
    mlp_median = _median_rollout_mse(mlp, spring_eval)
    criterion(knn <= 10 * mlp_median, f"KNN median {knn:.2e} vs 10 x MLP median {10 * mlp_median:.2e} "
                                      f"(mlp-3-64, 200 epochs, trained in {elapsed:.0f}s)")
