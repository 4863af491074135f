"""Execution of a single run for each phase."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset_io import (
    bundle_fixed_mask,
    bundle_trajectories,
    generate_bundle,
    ingest_external_ns,
    read_bundle,
    system_from_bundle,
    write_bundle,
)
from ..domain import TimeGrid
from ..errors import RunConfigError
from ..evaluation import rollout_derivative_batch, rollout_step_batch, timing_protocol, write_results
from ..learners import (
    MlpModel,
    TaskKind,
    TrainConfig,
    default_learning_rate,
    knn_fit,
    load_model,
    mlp_train,
    rf_train,
    save_model,
)
from ..sampling import source_from_description
from ..systems import emit_solver_scene

DATASET_DIR = "dataset"
MODEL_DIR = "model"
SCENE_DIR = "scenes"


def run_dir(experiment_dir, phase, name) -> Path:
    return Path(experiment_dir) / "run" / phase / name


def _dataset(experiment_dir, name):
    path = run_dir(experiment_dir, "data_gen", name) / DATASET_DIR
    if not path.is_dir():
        raise RunConfigError(f"data_gen run {name!r} produced no dataset (Navier-Stokes scenes need solver output)")
    return read_bundle(path)


def run_data_gen(experiment_dir, desc, out: Path) -> None:
    p = desc.payload
    source = source_from_description(p["source"])
    n = int(p["num_trajectories"])
    if p["system"] == "navier-stokes":
        scenes = [ic.state for ic in source.draw(n)]
        scene_dir = out / SCENE_DIR
        scene_dir.mkdir(parents=True, exist_ok=True)
        for i, scene in enumerate(scenes):
            (scene_dir / f"scene_{i:05d}.json").write_text(emit_solver_scene(scene))
        solver_root = p.get("solver_output")
        if solver_root:
            dirs = [Path(solver_root) / f"scene_{i:05d}" for i in range(n)]
            write_bundle(ingest_external_ns(dirs, scenes), out / DATASET_DIR)
        return
    g = p["grid"]
    grid = TimeGrid(g["step"], g["count"], g.get("subsample", 1))
    bundle = generate_bundle(p["system"], source, n, grid, p.get("integrator", "leapfrog"))
    write_bundle(bundle, out / DATASET_DIR)


def _train_config(desc, system):
    learner = desc.payload["learner"]
    opts = dict(desc.payload.get("train", {}))
    opts.setdefault("learning_rate", default_learning_rate(system, learner["kind"]))
    opts.setdefault("noise_variance", 1e-3 if system == "navier-stokes" else 0.0)
    opts["seed"] = int(desc.payload["seed"])
    if "betas" in opts:
        opts["betas"] = tuple(opts["betas"])
    return TrainConfig(**opts)


def run_train(experiment_dir, desc, out: Path) -> None:
    p = desc.payload
    bundle = _dataset(experiment_dir, p["dataset"])
    trajs = bundle_trajectories(bundle)
    task = TaskKind.parse(p["task"])
    learner = p["learner"]
    dim = trajs[0].states.shape[1]
    history = []
    if learner["kind"] == "mlp":
        mask = bundle_fixed_mask(bundle)
        extra = None if mask is None else mask.astype(np.float64)
        model = MlpModel.from_architecture(
            learner["architecture"], dim, dim, seed=int(p["seed"]), task=task, nq=trajs[0].nq, input_extra=extra
        )
        model, history = mlp_train(model, trajs, task, _train_config(desc, bundle.system))
    else:
        model = rf_train(
            trajs,
            task,
            n_features=int(learner.get("n_features", 1024)),
            seed=int(p["seed"]),
            ridge=learner.get("ridge"),
            stride=int(p.get("train", {}).get("sample_stride", 1)),
        )
    save_model(model, out / MODEL_DIR)
    (out / "history.json").write_text(json.dumps({"loss": history}, indent=2) + "\n")


def run_eval(experiment_dir, desc, out: Path) -> None:
    p = desc.payload
    task = TaskKind.parse(p["task"])
    bundle = _dataset(experiment_dir, p["eval_set"])
    refs = bundle_trajectories(bundle)
    if "train_set" in p:
        model = knn_fit(bundle_trajectories(_dataset(experiment_dir, p["train_set"])), task)
    else:
        model = load_model(run_dir(experiment_dir, "train", p["model_run"]) / MODEL_DIR)
    x0 = np.stack([r.states[0] for r in refs])
    count = min(len(r) for r in refs)
    timing = None
    if task is TaskKind.DERIVATIVE:
        results = rollout_derivative_batch(model, p["integrator"], x0, count, refs[0].grid.step, refs[0].nq, refs)
        if p.get("timing") and bundle.system != "navier-stokes":
            t = p["timing"]
            timing = timing_protocol(
                system_from_bundle(bundle),
                p["integrator"],
                results,
                max_power=int(t.get("max_power", 8)),
                direction=t.get("direction", "refine"),
            )
    else:
        results = rollout_step_batch(model, x0, count, refs, refs[0].grid.step, refs[0].nq)
    extra = {
        "system": bundle.system,
        "learner": p.get("learner", getattr(model, "kind", "unknown")),
        "task": task.value,
        "integrator": p.get("integrator"),
        "eval_set": p["eval_set"],
    }
    write_results(out, results, timing, extra)


RUNNERS = {"data_gen": run_data_gen, "train": run_train, "eval": run_eval}
