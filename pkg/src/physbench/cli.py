"""Command-line front end: ``physbench gen-descr|scan|launch|timing``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import PhysBenchError, RunConfigError
from .runmgr import PHASES, generate_descriptions, launch, scan, write_descriptions
from .runmgr.manager import COMPLETE, FAILED, INCOMPLETE, MISMATCHED, delete_runs
from .runmgr.jobs import run_dir

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_FAILURE = 2

DELETE_STATES = {"incomplete": INCOMPLETE, "mismatch": MISMATCHED, "mismatched": MISMATCHED, "failed": FAILED}


def _cmd_gen_descr(args):
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise RunConfigError(f"cannot read spec {args.spec}: {exc}") from None
    descriptions = generate_descriptions(spec)
    write_descriptions(descriptions, args.dir)
    counts = {p: sum(d.phase == p for d in descriptions) for p in PHASES}
    print(f"wrote {len(descriptions)} descriptions ({', '.join(f'{p}: {n}' for p, n in counts.items())})")
    return EXIT_OK


def _cmd_scan(args):
    entries = scan(args.dir)
    for e in entries:
        detail = f"  {e.detail}" if e.detail else ""
        print(f"{e.phase:9s} {e.name:48s} {e.state}{detail}")
    tally = {}
    for e in entries:
        tally[e.state] = tally.get(e.state, 0) + 1
    print("total: " + (", ".join(f"{n} {s}" for s, n in sorted(tally.items())) or "no runs"))
    if args.delete:
        states = {DELETE_STATES[s] for s in args.delete}
        removed = delete_runs(args.dir, entries, states)
        for e in removed:
            print(f"deleted {e.phase}/{e.name}")
    return EXIT_OK


def _cmd_launch(args):
    summary = launch(args.dir, args.phase, jobs=args.jobs)
    print(f"{summary.outstanding} outstanding")
    if summary.blocked:
        print("refusing to launch; waiting on:", file=sys.stderr)
        for name in summary.blocked:
            print(f"  {name}", file=sys.stderr)
        return EXIT_VALIDATION
    for r in summary.succeeded:
        print(f"done   {r['name']} ({r['wall_time']:.2f}s)")
    for r in summary.failed:
        print(f"FAILED {r['name']}: {r['error']}")
    return EXIT_FAILURE if summary.failed else EXIT_OK


def _cmd_timing(args):
    rows = []
    for e in scan(args.dir, phases=("eval",)):
        if e.state != COMPLETE:
            continue
        doc = json.loads((run_dir(args.dir, "eval", e.name) / "results.json").read_text())
        if doc.get("timing"):
            t = doc["timing"]
            rows.append((doc.get("system"), e.name, doc.get("integrator"), t.get("time_ratio"), t.get("scaling")))
    if not rows:
        print("no completed eval runs with timing results")
        return EXIT_OK
    print(f"{'system':14s} {'run':48s} {'integrator':10s} {'time ratio':>10s} {'scaling':>8s}")
    for system, name, integ, ratio, scaling in rows:
        ratio_text = f"{ratio:10.1f}" if isinstance(ratio, (int, float)) else f"{str(ratio):>10s}"
        print(f"{system:14s} {name:48s} {integ:10s} {ratio_text} {scaling:>8s}")
    return EXIT_OK


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="physbench", description="Physical simulation learning benchmark runs.")
    sub = parser.add_subparsers(dest="command", required=True)
    g = sub.add_parser("gen-descr", help="write run descriptions from an experiment spec")
    g.add_argument("spec")
    g.add_argument("dir")
    g.set_defaults(func=_cmd_gen_descr)
    s = sub.add_parser("scan", help="report the state of every run")
    s.add_argument("dir")
    s.add_argument("--delete", action="append", choices=sorted(DELETE_STATES), help="delete runs in this state")
    s.set_defaults(func=_cmd_scan)
    la = sub.add_parser("launch", help="run all outstanding jobs of a phase")
    la.add_argument("dir")
    la.add_argument("phase", choices=PHASES)
    la.add_argument("--jobs", type=_positive_int, default=1)
    la.set_defaults(func=_cmd_launch)
    t = sub.add_parser("timing", help="summarize timing results of completed eval runs")
    t.add_argument("dir")
    t.set_defaults(func=_cmd_timing)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RunConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PhysBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
