"""Scanning and launching runs in an experiment directory.

Layout::

    <dir>/descr/<phase>/<name>.json
    <dir>/run/<phase>/<name>/launch.json   written when a run starts
    <dir>/run/<phase>/<name>/alive         liveness file, removed at the end
    <dir>/run/<phase>/<name>/done.json     exit status, wall time, output digest
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import RunConfigError
from .descriptions import PHASES, RunDescription, read_description
from .jobs import RUNNERS, run_dir

LAUNCH_MARKER = "launch.json"
DONE_MARKER = "done.json"
ALIVE_FILE = "alive"
LOG_FILE = "run.log"
_MARKERS = {LAUNCH_MARKER, DONE_MARKER, ALIVE_FILE, LOG_FILE}

OUTSTANDING = "outstanding"
RUNNING = "running"
COMPLETE = "complete"
INCOMPLETE = "incomplete"
MISMATCHED = "mismatched"
FAILED = "failed"
MALFORMED = "malformed"


@dataclass
class ScanEntry:
    phase: str
    name: str
    state: str
    detail: str = ""
    description: RunDescription | None = None


@dataclass
class LaunchSummary:
    phase: str
    outstanding: int = 0
    succeeded: list = field(default_factory=list)
    failed: list = field(default_factory=list)
    blocked: list = field(default_factory=list)


def output_digest(directory) -> str:
    """SHA-256 over every output file (relative path and contents), markers excluded."""
    directory = Path(directory)
    h = hashlib.sha256()
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        rel = path.relative_to(directory).as_posix()
        if rel in _MARKERS:
            continue
        h.update(rel.encode() + b"\0")
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
        h.update(b"\0")
    return h.hexdigest()


def _pid_alive(pid) -> bool:
    try:
        os.kill(int(pid), 0)
    except (OSError, ValueError, TypeError):
        return False
    return True


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError):
        return None


def run_state(experiment_dir, desc: RunDescription):
    """Classify one run; returns ``(state, detail)``."""
    rd = run_dir(experiment_dir, desc.phase, desc.name)
    launch = _read_json(rd / LAUNCH_MARKER)
    if launch is None:
        return OUTSTANDING, ""
    if launch.get("description_hash") != desc.digest:
        return MISMATCHED, "description changed after launch"
    done = _read_json(rd / DONE_MARKER)
    if done is None:
        alive = _read_json(rd / ALIVE_FILE)
        if alive and _pid_alive(alive.get("pid")):
            return RUNNING, f"pid {alive.get('pid')}"
        return INCOMPLETE, "launched but never finished"
    if done.get("exit_status") != 0:
        return FAILED, done.get("error", "")
    if done.get("output_digest") != output_digest(rd):
        return INCOMPLETE, "outputs differ from the recorded digest"
    return COMPLETE, f"{done.get('wall_time', 0.0):.2f}s"


def load_descriptions(experiment_dir, phases=PHASES):
    """Read descriptions; malformed ones come back as ``(path, error)`` pairs."""
    good, bad = [], []
    for phase in phases:
        folder = Path(experiment_dir) / "descr" / phase
        if not folder.is_dir():
            continue
        for path in sorted(folder.glob("*.json")):
            try:
                good.append(read_description(path))
            except RunConfigError as exc:
                bad.append((phase, path, str(exc)))
    return good, bad


def scan(experiment_dir, phases=PHASES) -> list[ScanEntry]:
    experiment_dir = Path(experiment_dir)
    if not (experiment_dir / "descr").is_dir():
        raise RunConfigError(f"{experiment_dir} has no descr/ directory")
    good, bad = load_descriptions(experiment_dir, phases)
    entries = [ScanEntry(d.phase, d.name, *run_state(experiment_dir, d), description=d) for d in good]
    entries += [ScanEntry(phase, path.stem, MALFORMED, err) for phase, path, err in bad]
    order = {p: i for i, p in enumerate(PHASES)}
    return sorted(entries, key=lambda e: (order[e.phase], e.name))


def delete_runs(experiment_dir, entries, states) -> list[ScanEntry]:
    removed = []
    for e in entries:
        if e.state in states:
            shutil.rmtree(run_dir(experiment_dir, e.phase, e.name), ignore_errors=True)
            removed.append(e)
    return removed


def execute(experiment_dir, desc: RunDescription) -> dict:
    """Run one description and write its markers; never raises for run failures."""
    rd = run_dir(experiment_dir, desc.phase, desc.name)
    if rd.exists():
        shutil.rmtree(rd)
    rd.mkdir(parents=True)
    start = time.time()
    (rd / LAUNCH_MARKER).write_text(
        json.dumps({"description_hash": desc.digest, "start_time": start}, indent=2) + "\n"
    )
    (rd / ALIVE_FILE).write_text(json.dumps({"pid": os.getpid(), "start_time": start}) + "\n")
    status, error = 0, ""
    try:
        RUNNERS[desc.phase](experiment_dir, desc, rd)
    except Exception as exc:  # noqa: BLE001 - any failure is recorded, not propagated
        status, error = 1, f"{type(exc).__name__}: {exc}"
        (rd / LOG_FILE).write_text(traceback.format_exc())
    wall = time.time() - start
    done = {"exit_status": status, "wall_time": wall, "output_digest": output_digest(rd)}
    if error:
        done["error"] = error
    tmp = rd / (DONE_MARKER + ".tmp")
    tmp.write_text(json.dumps(done, indent=2) + "\n")
    os.replace(tmp, rd / DONE_MARKER)
    (rd / ALIVE_FILE).unlink(missing_ok=True)
    return {"name": desc.name, "exit_status": status, "error": error, "wall_time": wall}


def _execute_args(args):
    return execute(*args)


def blockers(experiment_dir, descriptions) -> list[str]:
    """Referenced earlier-phase runs that are not complete, as ``phase/name``."""
    blocked = set()
    for desc in descriptions:
        for phase, name in desc.dependencies():
            path = Path(experiment_dir) / "descr" / phase / f"{name}.json"
            if not path.is_file():
                blocked.add(f"{phase}/{name} (no description)")
                continue
            try:
                dep = read_description(path)
            except RunConfigError:
                blocked.add(f"{phase}/{name} (malformed)")
                continue
            state, _ = run_state(experiment_dir, dep)
            if state != COMPLETE:
                blocked.add(f"{phase}/{name} ({state})")
    return sorted(blocked)


def launch(experiment_dir, phase, jobs=1) -> LaunchSummary:
    """Execute every outstanding run of ``phase`` in sorted order.

    Refuses (with the blocking runs listed) when a referenced run from an
    earlier phase is not complete.
    """
    if phase not in PHASES:
        raise RunConfigError(f"unknown phase {phase!r}")
    entries = scan(experiment_dir, phases=(phase,))
    malformed = [e for e in entries if e.state == MALFORMED]
    if malformed:
        raise RunConfigError("malformed descriptions: " + ", ".join(f"{e.name} ({e.detail})" for e in malformed))
    todo = [e.description for e in entries if e.state == OUTSTANDING]
    summary = LaunchSummary(phase, outstanding=len(todo))
    if not todo:
        return summary
    summary.blocked = blockers(experiment_dir, todo)
    if summary.blocked:
        return summary
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_args, [(str(experiment_dir), d) for d in todo]))
    else:
        outcomes = [execute(experiment_dir, d) for d in todo]
    for outcome in outcomes:
        (summary.succeeded if outcome["exit_status"] == 0 else summary.failed).append(outcome)
    return summary
