"""Model checkpoints: ``model.json`` describing the model plus ``params.npz``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataset_io.npy import read_npz, write_npz
from ..errors import MalformedHeaderError, MissingFileError
from .data import TaskKind
from .knn import KnnModel
from .mlp import MlpModel
from .random_features import RandomFeatureModel

MODEL_FILE = "model.json"
PARAMS_FILE = "params.npz"


def _describe(model):
    doc = {"kind": model.kind, "task": model.task.value, "nq": model.nq}
    if isinstance(model, MlpModel):
        doc.update(architecture=model.architecture, layer_sizes=model.layer_sizes, seed=model.seed)
        arrays = {f"weight_{i}": w for i, w in enumerate(model.weights)}
        arrays.update({f"bias_{i}": b for i, b in enumerate(model.biases)})
        if model.input_extra is not None:
            arrays["input_extra"] = model.input_extra
        return doc, arrays
    if isinstance(model, RandomFeatureModel):
        doc.update(n_features=model.n_features, seed=model.seed, ridge=model.ridge)
        return doc, {"projections": model.projections, "weights": model.weights}
    if isinstance(model, KnnModel):
        doc.update(k=model.k, index_size=len(model))
        return doc, {"inputs": model.inputs, "targets": model.targets}
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_model(model, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc, arrays = _describe(model)
    write_npz(directory / PARAMS_FILE, arrays)
    (directory / MODEL_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_model(directory):
    directory = Path(directory)
    path = directory / MODEL_FILE
    if not path.is_file():
        raise MissingFileError(f"missing {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{path}: invalid JSON ({exc})") from None
    arrays = read_npz(directory / PARAMS_FILE)
    task = TaskKind.parse(doc["task"])
    kind = doc.get("kind")
    if kind == "mlp":
        depth = len(doc["layer_sizes"]) - 1
        return MlpModel(
            tuple(arrays[f"weight_{i}"] for i in range(depth)),
            tuple(arrays[f"bias_{i}"] for i in range(depth)),
            task,
            doc["seed"],
            doc["nq"],
            arrays.get("input_extra"),
        )
    if kind == "random-features":
        return RandomFeatureModel(arrays["projections"], arrays["weights"], task, doc["seed"], doc["ridge"], doc["nq"])
    if kind == "knn":
        return KnnModel(arrays["inputs"], arrays["targets"], task, nq=doc["nq"], k=doc["k"])
    raise MalformedHeaderError(f"{path}: unknown model kind {kind!r}")


def models_equal(a, b) -> bool:
    da, aa = _describe(a)
    db, ab = _describe(b)
    if da != db or set(aa) != set(ab):
        return False
    return all(aa[k].dtype == ab[k].dtype and np.array_equal(aa[k], ab[k]) for k in aa)
