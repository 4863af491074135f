"""Rollouts of learned models, trajectory error metrics and the timing protocol."""

from __future__ import annotations

import json
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset_io.npy import write_npz
from .domain import TimeGrid, Trajectory
from .errors import DivergenceError, SolverError
from .integrators import IntegratorKind, Stepper

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class RolloutResult:
    """A predicted trajectory and its error against a reference.

    ``per_step_mse[k - 1]`` compares snapshot ``k`` (the initial state is
    shared and not scored). After a divergence only the steps before it are
    kept.
    """

    predicted: Trajectory
    reference: Trajectory | None
    per_step_mse: np.ndarray
    trajectory_mse: float
    diverged_at: int | None = None
    step_seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def final_error(self) -> float:
        """Error at the final shared snapshot; infinite if the rollout diverged."""
        if self.diverged_at is not None:
            return math.inf
        return float(self.per_step_mse[-1]) if self.per_step_mse.size else 0.0


def per_step_mse(predicted, reference):
    """Mean squared error over all state entries for snapshots ``1..shared-1``."""
    a = np.asarray(predicted, dtype=np.float64)
    b = np.asarray(reference, dtype=np.float64)
    shared = min(a.shape[0], b.shape[0])
    if shared <= 1:
        return np.zeros(0)
    diff = a[1:shared] - b[1:shared]
    return np.mean(diff.reshape(shared - 1, -1) ** 2, axis=1)


def _trajectory_mse(errors, diverged):
    if errors.size:
        return float(np.mean(errors))
    return math.inf if diverged else 0.0


def _result(states, derivs, dt, nq, reference, diverged_at, seconds):
    grid = TimeGrid(dt, states.shape[0], 1)
    pred = Trajectory(grid, states, derivs, nq=nq)
    if reference is None:
        errs = np.zeros(0)
    else:
        errs = per_step_mse(states, reference.states)
    return RolloutResult(pred, reference, errs, _trajectory_mse(errs, diverged_at is not None), diverged_at, seconds)


def _bad_rows(x, limit):
    finite = np.isfinite(x).all(axis=1)
    norms = np.where(finite, np.linalg.norm(np.where(finite[:, None], x, 0.0), axis=1), np.inf)
    return ~finite | (norms > limit)


def _as_batch(x0):
    x0 = np.asarray(x0, dtype=np.float64)
    return x0[None, :] if x0.ndim == 1 else x0


def _references(references, batch):
    if references is None:
        return [None] * batch
    if isinstance(references, Trajectory):
        references = [references]
    references = list(references)
    if len(references) != batch:
        raise ValueError("one reference trajectory is needed per initial state")
    return references


def _run(advance, x0, count):
    """Drive ``advance`` over a batch; diverged rows are frozen at their last valid state."""
    B, n = x0.shape
    states = np.empty((count, B, n))
    states[0] = x0
    norm0 = np.linalg.norm(x0, axis=1)
    limit = DIVERGENCE_FACTOR * np.where(norm0 > 0, norm0, 1.0)
    diverged = np.full(B, -1, dtype=np.int64)
    seconds = np.zeros(max(count - 1, 0))
    x = x0.copy()
    for k in range(1, count):
        start = time.perf_counter()
        try:
            y = np.asarray(advance(x), dtype=np.float64)
        except (DivergenceError, SolverError, FloatingPointError):
            y = np.full_like(x, np.nan)
        seconds[k - 1] = (time.perf_counter() - start) / B
        bad = _bad_rows(y, limit) & (diverged < 0)
        diverged[bad] = k
        dead = diverged >= 0
        if dead.any():
            y = np.where(dead[:, None], x, y)
        states[k] = y
        x = y
        if dead.all():
            states[k + 1 :] = x
            seconds = seconds[:k]
            break
    return states, diverged, seconds


def rollout_derivative_batch(model, integrator, x0, count, dt, nq=None, references=None, cfg=None):
    """Integrate ``model.derivative`` from each row of ``x0`` for ``count`` snapshots."""
    x0 = _as_batch(x0)
    nq = nq if nq is not None else getattr(model, "nq", None)
    stepper = Stepper(model, IntegratorKind.parse(integrator), dt, nq=nq, cfg=cfg)
    states, diverged, seconds = _run(stepper.step, x0, count)
    f = stepper.f
    out = []
    for i, ref in enumerate(_references(references, x0.shape[0])):
        stop = count if diverged[i] < 0 else int(diverged[i])
        s = states[:stop, i]
        at = None if diverged[i] < 0 else int(diverged[i])
        out.append(_result(s, f(s), dt, nq or 0, ref, at, seconds))
    return out


def rollout_derivative(model, integrator, x0, grid: TimeGrid | None = None, reference=None, nq=None, cfg=None):
    """Roll out a derivative model with a classical integrator.

    ``x0`` may be a reference :class:`Trajectory`, in which case its first
    state, its stored stride and its length are used. Learned rollouts always
    step at the stored stride (no inner subsampling).
    """
    if isinstance(x0, Trajectory):
        reference = x0
        grid = grid or x0.grid
        x0 = x0.states[0]
        nq = nq if nq is not None else reference.nq
    if grid is None:
        raise ValueError("a time grid is required")
    return rollout_derivative_batch(model, integrator, x0, grid.count, grid.step, nq, reference, cfg)[0]


def rollout_step_batch(model, x0, count, references=None, dt=1.0, nq=None):
    """Apply a step model recurrently: ``x_{k+1} = model(x_k)``."""
    x0 = _as_batch(x0)
    predict = model.predict if hasattr(model, "predict") else model
    states, diverged, seconds = _run(predict, x0, count)
    nq = nq if nq is not None else (getattr(model, "nq", None) or 0)
    out = []
    for i, ref in enumerate(_references(references, x0.shape[0])):
        stop = count if diverged[i] < 0 else int(diverged[i])
        s = states[:stop, i]
        # successive differences stand in for derivatives of a step rollout
        d = np.zeros_like(s) if stop < 2 else np.gradient(s, dt, axis=0)
        at = None if diverged[i] < 0 else int(diverged[i])
        out.append(_result(s, d, dt if ref is None else ref.grid.step, nq, ref, at, seconds))
    return out


def rollout_step(model, x0, count=None, reference=None):
    if isinstance(x0, Trajectory):
        reference = x0
        count = count or len(x0)
        x0 = x0.states[0]
    if count is None or count < 1:
        raise ValueError("count must be at least 1")
    dt = reference.grid.step if reference is not None else 1.0
    return rollout_step_batch(model, x0, count, reference, dt)[0]


def step_weights(n: int) -> np.ndarray:
    """Weights ``exp(-ln(100) p_t)`` with ``p_t = k / (n - 1)`` for ``k = 0..n-1``.

    Evaluated as ``100 ** -p_t``, which is the same function but lands on
    exactly 1 and 0.01 at the endpoints.
    """
    if n < 1:
        raise ValueError("need at least one step")
    if n == 1:
        return np.ones(1)
    p = np.arange(n, dtype=np.float64) / (n - 1)
    return np.power(100.0, -p)


def weighted_trajectory_mse(per_step) -> float:
    e = np.asarray(per_step, dtype=np.float64)
    if e.size == 0:
        raise ValueError("per-step errors are empty")
    return float(np.mean(step_weights(e.size) * e))


# ---------------------------------------------------------------- timing


@dataclass(frozen=True)
class TimingReport:
    """Per-trajectory scaling factors (``None`` means no crossing) and their summary."""

    scalings: tuple
    modal_scaling: int | None
    max_power: int
    time_ratio: float
    learned_step_seconds: float
    integrator_step_seconds: float

    @property
    def scaling_label(self) -> str:
        return format_scaling(self.modal_scaling, self.max_power)

    def to_dict(self):
        return {
            "scalings": [None if s is None else int(s) for s in self.scalings],
            "modal_scaling": self.modal_scaling,
            "scaling": self.scaling_label,
            "max_power": self.max_power,
            "time_ratio": self.time_ratio,
            "learned_step_seconds": self.learned_step_seconds,
            "integrator_step_seconds": self.integrator_step_seconds,
        }


def format_scaling(scaling, max_power):
    return f">={2 ** max_power}x" if scaling is None else f"{int(scaling)}x"


def scaling_factor(integrator_errors, learned_error, direction="refine"):
    """Smallest power of two at which the integrator matches the learned method.

    ``integrator_errors[j]`` is the integrator's error when run with
    scaling ``2**j``. With ``direction="refine"`` the integrator uses steps
    ``dt / 2**j`` and the answer is the first ``2**j`` whose error drops
    below the learned error. With ``direction="coarsen"`` it uses steps
    ``dt * 2**j`` and the answer is the first ``2**j`` whose error exceeds
    the learned error. ``None`` means no crossing within the tested range.
    """
    learned = float(learned_error)
    errs = np.asarray(integrator_errors, dtype=np.float64)
    if direction == "refine":
        hits = np.flatnonzero(np.isfinite(errs) & (errs < learned))
    elif direction == "coarsen":
        if not np.isfinite(learned):
            return None
        hits = np.flatnonzero(~np.isfinite(errs) | (errs > learned))
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return int(2 ** hits[0]) if hits.size else None


def modal_scaling(scalings):
    """Most common scaling; ties go to the smaller factor, the sentinel ranks last."""
    if not scalings:
        return None
    counts = Counter(scalings)
    best = max(counts.values())
    tied = [s for s, c in counts.items() if c == best]
    finite = sorted(s for s in tied if s is not None)
    return finite[0] if finite else None


def _integrator_final_errors(system, integrator, x0, ref_final, final_time, dt, cfg):
    steps = final_time / dt
    n_steps = int(round(steps))
    if n_steps < 1 or abs(n_steps - steps) > 1e-9 * max(steps, 1.0):
        return np.full(x0.shape[0], np.nan), math.nan
    stepper = Stepper(system, integrator, dt, cfg=cfg)
    x = x0.copy()
    start = time.perf_counter()
    try:
        for _ in range(n_steps):
            x = stepper.step(x)
    except (DivergenceError, SolverError):
        return np.full(x0.shape[0], np.inf), math.nan
    per_step = (time.perf_counter() - start) / (n_steps * x0.shape[0])
    err = np.mean((x - ref_final) ** 2, axis=1)
    return np.where(np.isfinite(err), err, np.inf), per_step


def timing_protocol(system, integrator, learned_results, dt_base=None, max_power=8, direction="refine", cfg=None):
    """Compare learned rollouts with a classical integrator at power-of-two step sizes.

    Each learned result must carry its reference trajectory. The learned
    error is taken at the final shared snapshot (infinite after a
    divergence); the integrator is started from the same initial state and
    scored against the same reference snapshot.
    """
    results = list(learned_results)
    if not results:
        raise ValueError("no learned results")
    kind = IntegratorKind.parse(integrator)
    x0 = np.stack([r.reference.states[0] for r in results])
    shared = [
        len(r.reference) - 1 if r.diverged_at is not None else min(len(r.reference), len(r.predicted)) - 1
        for r in results
    ]
    dt_learned = results[0].predicted.grid.step
    dt_base = dt_learned if dt_base is None else float(dt_base)
    ref_final = np.stack([r.reference.states[s] for r, s in zip(results, shared)])
    final_time = np.array([s * r.reference.grid.step for r, s in zip(results, shared)])
    errors = np.full((max_power + 1, len(results)), np.nan)
    base_step_seconds = math.nan
    for t in np.unique(final_time):
        rows = np.flatnonzero(final_time == t)
        for j in range(max_power + 1):
            dt = dt_base / 2**j if direction == "refine" else dt_base * 2**j
            errs, secs = _integrator_final_errors(system, kind, x0[rows], ref_final[rows], t, dt, cfg)
            errors[j, rows] = errs
            if j == 0 and not math.isnan(secs):
                base_step_seconds = secs if math.isnan(base_step_seconds) else min(base_step_seconds, secs)
    scalings = tuple(scaling_factor(errors[:, i], r.final_error, direction) for i, r in enumerate(results))
    learned_secs = np.concatenate([r.step_seconds for r in results if r.step_seconds.size] or [np.zeros(1)])
    learned_median = float(np.median(learned_secs))
    ratio = learned_median / base_step_seconds if base_step_seconds and base_step_seconds > 0 else math.nan
    return TimingReport(scalings, modal_scaling(list(scalings)), max_power, ratio, learned_median, base_step_seconds)


# ---------------------------------------------------------------- summaries


def aggregate_report(values) -> dict:
    """Box-plot statistics with linear-interpolation quantiles and 1.5 IQR whiskers.

    ``values`` may be plain numbers or :class:`RolloutResult` objects (their
    trajectory MSE is used). Non-finite values are counted separately.
    """
    raw = [v.trajectory_mse if isinstance(v, RolloutResult) else float(v) for v in values]
    if not raw:
        raise ValueError("no results to aggregate")
    arr = np.asarray(raw, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    summary = {"count": int(arr.size), "non_finite": int(arr.size - finite.size)}
    if finite.size == 0:
        summary.update(median=math.inf, q1=math.inf, q3=math.inf, whisker_low=math.inf, whisker_high=math.inf, outliers=[])
        return summary
    q1, med, q3 = np.quantile(finite, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = finite[(finite >= lo_fence) & (finite <= hi_fence)]
    summary.update(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        mean=float(np.mean(finite)),
        lower_fence=float(lo_fence),
        upper_fence=float(hi_fence),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=sorted(float(v) for v in finite if v < lo_fence or v > hi_fence),
    )
    return summary


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_results(directory, results, timing: TimingReport | None = None, extra=None) -> dict:
    """Write ``results.json`` plus ``per_step_mse.npz``; returns the JSON document."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    results = list(results)
    arrays = {f"traj_{i:05d}_per_step_mse": r.per_step_mse for i, r in enumerate(results)}
    write_npz(directory / "per_step_mse.npz", arrays)
    doc = {
        "summary": aggregate_report(results) if results else {},
        "trajectories": [
            {
                "trajectory_mse": r.trajectory_mse,
                "weighted_mse": weighted_trajectory_mse(r.per_step_mse) if r.per_step_mse.size else None,
                "final_error": r.final_error,
                "diverged_at": r.diverged_at,
                "steps": int(r.per_step_mse.size),
                "per_step_mse": f"traj_{i:05d}_per_step_mse",
            }
            for i, r in enumerate(results)
        ],
        "timing": timing.to_dict() if timing else None,
    }
    if extra:
        doc.update(extra)
    doc = _json_safe(doc)
    (directory / "results.json").write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return doc
