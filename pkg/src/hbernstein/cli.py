"""Command-line front end: hbernstein {area,chars,vary,calibrate,bernstein,reproduce}."""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .scenario import ScenarioError, ScenarioSpec, run_scenario, write_artifacts

EXIT_OK, EXIT_THRESHOLD, EXIT_INVALID = 0, 1, 2

COMMANDS = {
    "area": "area",
    "chars": "characteristics",
    "vary": "variation",
    "calibrate": "calibration",
    "bernstein": "bernstein",
    "reproduce": "reproduce",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hbernstein", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, kind in COMMANDS.items():
        p = sub.add_parser(cmd, help=f"run {kind} scenarios")
        p.add_argument("--scenario", type=Path, required=cmd != "reproduce",
                       help="scenario JSON file, or a directory of them")
        p.add_argument("--out", type=Path, default=Path("hbernstein-out"), help="artifact directory")
        p.add_argument("--tol", type=float, default=None, help="override the scenario tolerance")
        p.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    return parser


def _scenario_files(path: Path):
    if path.is_dir():
        return sorted(path.glob("*.json"))
    return [path]


def _apply_overrides(spec: ScenarioSpec, tol, seed) -> ScenarioSpec:
    doc = {"kind": spec.kind, "name": spec.name, "seed": spec.seed if seed is None else seed,
           "tol": spec.tol if tol is None else tol, **spec.inputs}
    return ScenarioSpec.from_dict(doc)


def _run_one(job):
    """Worker: returns (name, exit status, message)."""
    source, expected_kind, outdir, tol, seed = job
    try:
        spec = ScenarioSpec.load(source) if isinstance(source, Path) else ScenarioSpec.from_dict(source)
        if expected_kind is not None and spec.kind != expected_kind:
            raise ScenarioError(f"{spec.name}: kind {spec.kind!r} does not match this subcommand")
        spec = _apply_overrides(spec, tol, seed)
        out = run_scenario(spec)
    except ScenarioError as e:
        return str(source), EXIT_INVALID, f"invalid: {e}"
    paths = write_artifacts(spec, out, outdir)
    status = EXIT_OK if out.passed else EXIT_THRESHOLD
    return spec.name, status, ("ok" if out.passed else "threshold failure") + f" -> {paths[0]}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_INVALID
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    kind = COMMANDS[args.command]
    jobs = []
    if args.scenario is not None:
        if not args.scenario.exists():
            print(f"error: no such scenario path: {args.scenario}", file=sys.stderr)
            return EXIT_INVALID
        files = _scenario_files(args.scenario)
        # reproduce accepts any kind; other subcommands insist on their own
        expected = None if kind == "reproduce" else kind
        jobs = [(f, expected, args.out, args.tol, args.seed) for f in files]
        if not files and kind != "reproduce":
            print(f"error: no scenario files in {args.scenario}", file=sys.stderr)
            return EXIT_INVALID
    if kind == "reproduce":
        jobs.insert(0, ({"kind": "reproduce", "name": "reproduce"}, None, args.out, None, args.seed))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    if kind == "reproduce":
        _print_table(args.out / "reproduce.timings.csv")
    for name, status, msg in results:
        print(f"{name}: {msg}")
    statuses = {s for _, s, _ in results}
    if EXIT_INVALID in statuses:
        return EXIT_INVALID
    return EXIT_THRESHOLD if EXIT_THRESHOLD in statuses else EXIT_OK


def _print_table(timings: Path):
    if not timings.exists():
        return
    with timings.open() as fh:
        rows = list(csv.DictReader(fh))
    print(f"{'criterion':<26} {'result':<6} {'seconds':>8} {'budget':>7}")
    for r in rows:
        print(f"{r['criterion']:<26} {'PASS' if r['pass'] == 'True' else 'FAIL':<6} "
              f"{float(r['seconds']):8.2f} {float(r['budget_s']):7g}")


if __name__ == "__main__":
    sys.exit(main())

