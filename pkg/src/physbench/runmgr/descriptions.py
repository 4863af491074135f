"""Run descriptions: one JSON document per (phase, run), generated from an experiment spec."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import RunConfigError
from ..integrators import IntegratorKind
from ..learners.data import TaskKind
from ..learners.mlp import parse_architecture
from ..systems import SYSTEM_KINDS

PHASES = ("data_gen", "train", "eval")
LEARNERS = ("knn", "mlp", "random-features")

# train sizes, eval size, stored step, subsample, snapshots
SYSTEM_DEFAULTS = {
    "spring": ((10, 500, 1000), 30, 0.00781, 128, 805),
    "wave": ((10, 25, 50), 6, 0.00049, 8, 10204),
    "spring-mesh": ((25, 50, 100), 15, 0.00781, 128, 805),
    "navier-stokes": ((25, 50, 100), 5, 0.08, 1, 65),
}


def canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False).encode("utf8")


def description_hash(doc) -> str:
    return hashlib.sha256(canonical_json(doc)).hexdigest()


@dataclass(frozen=True)
class RunDescription:
    phase: str
    experiment: str
    name: str
    payload: dict

    def to_dict(self):
        return {"phase": self.phase, "experiment": self.experiment, "name": self.name, "payload": self.payload}

    @property
    def digest(self) -> str:
        return description_hash(self.to_dict())

    def dependencies(self) -> list[tuple[str, str]]:
        """``(phase, name)`` pairs of runs that must complete first."""
        p = self.payload
        if self.phase == "train":
            return [("data_gen", p["dataset"])]
        if self.phase == "eval":
            deps = [("data_gen", p["eval_set"])]
            if "model_run" in p:
                deps.append(("train", p["model_run"]))
            if "train_set" in p:
                deps.append(("data_gen", p["train_set"]))
            return deps
        return []

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or set(doc) != {"phase", "experiment", "name", "payload"}:
            raise RunConfigError("description must have exactly phase, experiment, name, payload")
        desc = cls(doc["phase"], doc["experiment"], doc["name"], doc["payload"])
        validate_description(desc)
        return desc


def _require(payload, keys, where):
    missing = [k for k in keys if k not in payload]
    if missing:
        raise RunConfigError(f"{where}: missing {', '.join(missing)}")


def validate_description(desc: RunDescription) -> None:
    where = f"{desc.phase}/{desc.name}"
    if desc.phase not in PHASES:
        raise RunConfigError(f"{where}: unknown phase")
    if not desc.name or "/" in desc.name or desc.name.startswith("."):
        raise RunConfigError(f"{where}: invalid run name")
    p = desc.payload
    if not isinstance(p, dict):
        raise RunConfigError(f"{where}: payload must be an object")
    try:
        if desc.phase == "data_gen":
            _require(p, ("system", "source", "num_trajectories", "grid"), where)
            if p["system"] not in SYSTEM_KINDS:
                raise RunConfigError(f"{where}: unknown system {p['system']!r}")
            IntegratorKind.parse(p.get("integrator", "leapfrog"))
        elif desc.phase == "train":
            _require(p, ("learner", "task", "dataset", "seed"), where)
            TaskKind.parse(p["task"])
            if p["learner"].get("kind") not in ("mlp", "random-features"):
                raise RunConfigError(f"{where}: learner {p['learner'].get('kind')!r} has no training phase")
        else:
            _require(p, ("task", "eval_set"), where)
            TaskKind.parse(p["task"])
            if ("model_run" in p) == ("train_set" in p):
                raise RunConfigError(f"{where}: exactly one of model_run or train_set is required")
            if TaskKind.parse(p["task"]) is TaskKind.DERIVATIVE:
                IntegratorKind.parse(p.get("integrator"))
    except ValueError as exc:
        raise RunConfigError(f"{where}: {exc}") from None


def _system_defaults(entry):
    system = entry["system"]
    if system not in SYSTEM_DEFAULTS:
        raise RunConfigError(f"unknown system {system!r}")
    sizes, n_eval, step, subsample, count = SYSTEM_DEFAULTS[system]
    return {
        "train_sizes": list(entry.get("train_sizes", sizes)),
        "eval_size": int(entry.get("eval_size", n_eval)),
        "grid": {
            "step": float(entry.get("time_step", step)),
            "subsample": int(entry.get("subsample", subsample)),
            "count": int(entry.get("num_time_steps", count)),
        },
    }


def _source(system, seed, ood, options):
    return {"kind": system, "seed": int(seed), "ood": bool(ood), **options}


def _learner_label(learner):
    kind = learner["kind"]
    if kind == "mlp":
        parse_architecture(learner["architecture"])
        return learner["architecture"]
    if kind == "random-features":
        return f"rf-{int(learner.get('n_features', 1024))}"
    if kind == "knn":
        return "knn"
    raise RunConfigError(f"unknown learner kind {kind!r}")


def generate_descriptions(spec: dict) -> list[RunDescription]:
    """Expand an experiment spec into run descriptions (deterministic order).

    Spec keys: ``experiment``, ``datasets`` (system, seed, eval_seed, optional
    per-system default overrides, ``source`` options, ``ood_eval``), ``learners``,
    ``tasks``, ``integrators``, ``replicas`` and optional ``timing``.
    """
    experiment = spec.get("experiment", "experiment")
    out: list[RunDescription] = []
    tasks = [TaskKind.parse(t).value for t in spec.get("tasks", ["derivative"])]
    integrators = [IntegratorKind.parse(i).value for i in spec.get("integrators", ["leapfrog"])]
    replicas = list(spec.get("replicas", [0]))
    for entry in spec.get("datasets", []):
        system = entry["system"]
        d = _system_defaults(entry)
        seed = int(entry.get("seed", 0))
        eval_seed = int(entry.get("eval_seed", seed + 1))
        options = dict(entry.get("source", {}))
        gen = {"integrator": IntegratorKind.parse(entry.get("integrator", "leapfrog")).value}
        if system == "navier-stokes" and "solver_output" in entry:
            gen["solver_output"] = entry["solver_output"]
        train_sets = []
        for n in d["train_sizes"]:
            name = f"{system}-train-{n}"
            # every size shares one source, so larger sets extend smaller ones
            payload = {"system": system, "source": _source(system, seed, False, options), "num_trajectories": int(n),
                       "grid": d["grid"], **gen}
            out.append(RunDescription("data_gen", experiment, name, payload))
            train_sets.append(name)
        eval_sets = [f"{system}-eval"]
        payload = {"system": system, "source": _source(system, eval_seed, False, options),
                   "num_trajectories": d["eval_size"], "grid": d["grid"], **gen}
        out.append(RunDescription("data_gen", experiment, eval_sets[0], payload))
        if entry.get("ood_eval", False):
            eval_sets.append(f"{system}-eval-ood")
            payload = {**payload, "source": _source(system, eval_seed, True, options)}
            out.append(RunDescription("data_gen", experiment, eval_sets[1], payload))
        for learner in spec.get("learners", []):
            label = _learner_label(learner)
            for task in tasks:
                for train_set in train_sets:
                    if learner["kind"] == "knn":
                        models = [({"train_set": train_set}, f"{label}-{task}-{train_set}")]
                    else:
                        models = []
                        for r in replicas:
                            run = f"{label}-{task}-{train_set}-r{r}"
                            out.append(
                                RunDescription(
                                    "train",
                                    experiment,
                                    run,
                                    {"learner": learner, "task": task, "dataset": train_set, "seed": int(r),
                                     "train": dict(spec.get("train", {}), **learner.get("train", {}))},
                                )
                            )
                            models.append(({"model_run": run}, run))
                    for ref, stem in models:
                        for eval_set in eval_sets:
                            suffix = "-ood" if eval_set.endswith("-ood") else ""
                            for integ in integrators if task == "derivative" else [None]:
                                payload = {**ref, "learner": learner["kind"], "task": task, "eval_set": eval_set}
                                name = f"{stem}{suffix}"
                                if integ is not None:
                                    payload["integrator"] = integ
                                    name += f"-{integ}"
                                    if spec.get("timing"):
                                        payload["timing"] = spec["timing"]
                                out.append(RunDescription("eval", experiment, name, payload))
    seen = set()
    for desc in out:
        key = (desc.phase, desc.name)
        if key in seen:
            raise RunConfigError(f"duplicate run name {desc.phase}/{desc.name}")
        seen.add(key)
        validate_description(desc)
    return out


def description_text(desc: RunDescription) -> bytes:
    return (json.dumps(desc.to_dict(), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n").encode()


def write_descriptions(descriptions, directory) -> list[Path]:
    directory = Path(directory)
    paths = []
    for phase in PHASES:
        (directory / "descr" / phase).mkdir(parents=True, exist_ok=True)
    for desc in descriptions:
        path = directory / "descr" / desc.phase / f"{desc.name}.json"
        path.write_bytes(description_text(desc))
        paths.append(path)
    return paths


def read_description(path) -> RunDescription:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise RunConfigError(f"{path}: unreadable description ({exc})") from None
    desc = RunDescription.from_dict(doc)
    if desc.phase != path.parent.name or desc.name != path.stem:
        raise RunConfigError(f"{path}: phase/name do not match the file location")
    return desc
