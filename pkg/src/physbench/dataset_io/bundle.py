"""Dataset bundles: ``system_meta.json`` plus ``trajectories.npz``.

Channel names are resolved exclusively through each trajectory's
``field_keys`` mapping; record names are opaque.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import (
    BundleValidationError,
    ChannelMismatchError,
    DanglingReferenceError,
    MalformedHeaderError,
    MissingFileError,
)
from .npy import read_npz, write_npz

META_FILE = "system_meta.json"
ARRAY_FILE = "trajectories.npz"

F8 = np.dtype(np.float64)
I8 = np.dtype(np.int64)
B1 = np.dtype(bool)

_STATE4 = ("q", "p", "dqdt", "dpdt")

# channel -> (shape symbols, dtype, alias target)
CHANNEL_TABLES = {
    "spring": {
        **{c: (("Nt", 1), F8, None) for c in _STATE4},
        "t": (("Nt",), F8, None),
    },
    "wave": {
        **{c: (("Nt", "Np"), F8, None) for c in _STATE4},
        "t": (("Nt",), F8, None),
    },
    "spring-mesh": {
        **{c: (("Nt", "Np", 2), F8, None) for c in _STATE4},
        "t": (("Nt",), F8, None),
        "edge_indices": ((2, "Ne"), I8, None),
        "masses": (("Np",), F8, None),
        "fixed_mask": (("Np",), B1, None),
        "fixed_mask_q": (("Np", 2), B1, None),
        "fixed_mask_p": (("Np", 2), B1, "fixed_mask_q"),
        "extra_fixed_mask": (("Np",), B1, "fixed_mask"),
    },
    "navier-stokes": {
        "solutions": (("Nt", "Np", 2), F8, None),
        "pressures": (("Nt", "Np"), F8, None),
        "grads": (("Nt", "Np", 2), F8, None),
        "pressures_grads": (("Nt", "Np"), F8, None),
        "t": (("Nt",), F8, None),
        "q": (("Nt", "Np"), F8, "pressures"),
        "p": (("Nt", "Np", 2), F8, "solutions"),
        "dqdt": (("Nt", "Np"), F8, "pressures_grads"),
        "dpdt": (("Nt", "Np", 2), F8, "grads"),
        "edge_indices": ((2, "Ne"), I8, None),
        "vertices": (("Np", 2), F8, None),
        "fixed_mask": (("Np",), B1, None),
        "fixed_mask_solutions": (("Np", 2), B1, None),
        "fixed_mask_pressures": (("Np",), B1, None),
        "fixed_mask_q": (("Np",), B1, "fixed_mask_pressures"),
        "fixed_mask_p": (("Np", 2), B1, "fixed_mask_solutions"),
        "extra_fixed_mask": (("Np", 2), B1, None),
    },
}

BOOLEAN_CHANNELS = {name for table in CHANNEL_TABLES.values() for name, spec in table.items() if spec[1] == B1}


@dataclass
class DatasetBundle:
    system: str
    system_args: dict
    metadata: dict
    trajectories: list
    records: dict = field(default_factory=dict)

    def document(self) -> dict:
        return {
            "system": self.system,
            "system_args": self.system_args,
            "metadata": self.metadata,
            "trajectories": self.trajectories,
        }

    def channel(self, index: int, name: str) -> np.ndarray:
        return self.records[self.trajectories[index]["field_keys"][name]]

    def __len__(self):
        return len(self.trajectories)


def _check(bundle: DatasetBundle):
    """Yield ``(kind, message)`` pairs for every violated invariant."""
    table = CHANNEL_TABLES.get(bundle.system)
    if table is None:
        yield "structure", f"unknown system {bundle.system!r}"
        return
    if not isinstance(bundle.system_args, dict) or not isinstance(bundle.system_args.get("trajectory_defs"), list):
        yield "structure", "system_args.trajectory_defs must be an array"
    elif len(bundle.system_args["trajectory_defs"]) != len(bundle.trajectories):
        yield "structure", "trajectory_defs and trajectories differ in length"
    for i, traj in enumerate(bundle.trajectories):
        where = f"trajectory {i}"
        for key in ("name", "num_time_steps", "time_step_size", "timing", "field_keys"):
            if key not in traj:
                yield "structure", f"{where}: missing {key}"
        keys = traj.get("field_keys", {})
        missing = set(table) - set(keys)
        extra = set(keys) - set(table)
        if missing:
            yield "structure", f"{where}: missing channels {sorted(missing)}"
        if extra:
            yield "structure", f"{where}: unknown channels {sorted(extra)}"
        bound = {"Nt": traj.get("num_time_steps")}
        for channel in table:
            if channel not in keys:
                continue
            shape_spec, dtype, alias = table[channel]
            record = keys[channel]
            if alias is not None and keys.get(alias) != record:
                yield "alias", f"{where}: {channel} must alias {alias}"
            if record not in bundle.records:
                yield "dangling", f"{where}: {channel} references missing record {record!r}"
                continue
            arr = bundle.records[record]
            if arr.dtype != dtype:
                yield "channel", f"{where}: {channel} has dtype {arr.dtype}, expected {dtype}"
            if arr.ndim != len(shape_spec):
                yield "channel", f"{where}: {channel} has shape {arr.shape}, expected {shape_spec}"
                continue
            for axis, (want, got) in enumerate(zip(shape_spec, arr.shape)):
                if isinstance(want, str):
                    want = bound.setdefault(want, got)
                if want != got:
                    yield "channel", f"{where}: {channel} has shape {arr.shape}, expected {shape_spec} with {bound}"
                    break
        if "t" in keys and keys["t"] in bundle.records:
            t = bundle.records[keys["t"]]
            if t.ndim == 1 and t.size > 1 and not np.all(np.diff(t) > 0):
                yield "order", f"{where}: t is not strictly increasing"


def validate_bundle(bundle: DatasetBundle) -> list[str]:
    return [msg for _, msg in _check(bundle)]


def _json_text(doc) -> bytes:
    return (json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False) + "\n").encode("utf8")


def write_bundle(bundle: DatasetBundle, directory) -> None:
    violations = validate_bundle(bundle)
    if violations:
        raise BundleValidationError(violations)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = _json_text(bundle.document())
    tmp_meta = directory / (META_FILE + ".tmp")
    tmp_arr = directory / (ARRAY_FILE + ".tmp")
    tmp_meta.write_bytes(meta)
    write_npz(tmp_arr, bundle.records)
    os.replace(tmp_arr, directory / ARRAY_FILE)
    os.replace(tmp_meta, directory / META_FILE)


def read_bundle(directory) -> DatasetBundle:
    directory = Path(directory)
    meta_path = directory / META_FILE
    arr_path = directory / ARRAY_FILE
    for path in (meta_path, arr_path):
        if not path.is_file():
            raise MissingFileError(f"missing {path}")
    try:
        doc = json.loads(meta_path.read_text(encoding="utf8"))
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"{meta_path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict) or set(doc) != {"system", "system_args", "metadata", "trajectories"}:
        raise MalformedHeaderError(f"{meta_path}: top level must have system, system_args, metadata, trajectories")
    bundle = DatasetBundle(doc["system"], doc["system_args"], doc["metadata"], doc["trajectories"], read_npz(arr_path))
    problems = list(_check(bundle))
    dangling = [m for k, m in problems if k == "dangling"]
    if dangling:
        raise DanglingReferenceError("; ".join(dangling))
    mismatched = [m for k, m in problems if k in ("channel", "alias")]
    if mismatched:
        raise ChannelMismatchError("; ".join(mismatched))
    return bundle


def bundles_equal(a: DatasetBundle, b: DatasetBundle) -> bool:
    """Element-exact equality of documents and every record (dtype and shape included)."""
    if json.dumps(a.document()) != json.dumps(b.document()):
        return False
    if set(a.records) != set(b.records):
        return False
    for name, arr in a.records.items():
        other = b.records[name]
        if arr.dtype != other.dtype or arr.shape != other.shape:
            return False
        if arr.tobytes() != other.tobytes():
            return False
    return True
