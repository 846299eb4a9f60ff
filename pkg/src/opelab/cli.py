"""Command-line entry point: ``opelab <kind> --config FILE [--out DIR] [--workers N]``.

Outputs go to ``<out>/<config hash>/<experiment name>/``: the CSV and gnuplot
files of the experiment, ``report.json`` (assertions, hash, tolerances) and
``timings.json`` (wall-clock only, excluded from determinism checks).
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import fock
from .errors import ConfigError, OpelabError
from .runner import KINDS, TOL, ExperimentSpec, dumps, load_spec, run

EXIT_FAIL = 1
EXIT_CONFIG = 2


def _error_json(exc):
    payload = {"error": getattr(exc, "code", type(exc).__name__), "message": str(exc)}
    payload.update({k: v for k, v in getattr(exc, "details", {}).items()})
    return json.dumps(payload, sort_keys=True, default=str)


def write_outputs(spec, result, out_root, elapsed):
    run_dir = os.path.join(out_root, spec.config_hash(), spec.name)
    os.makedirs(run_dir, exist_ok=True)
    for name, text in sorted(result.files.items()):
        with open(os.path.join(run_dir, name), "w") as fh:
            fh.write(text)
    report = {
        "name": spec.name,
        "kind": spec.kind,
        "config_hash": spec.config_hash(),
        "model": spec.model.as_dict(),
        "params": spec.params,
        "passed": result.passed,
        "assertions": result.assertions,
        "tolerances": TOL,
        "data": result.data,
        "files": sorted(result.files),
        "timings_file": "timings.json",
    }
    with open(os.path.join(run_dir, "report.json"), "w") as fh:
        fh.write(dumps(report))
    with open(os.path.join(run_dir, "timings.json"), "w") as fh:
        fh.write(json.dumps({"wall_seconds": elapsed}) + "\n")
    return run_dir


def run_spec(spec, out_root):
    """Run one spec and write its outputs; returns (name, passed, run_dir)."""
    start = time.perf_counter()
    result = run(spec)
    run_dir = write_outputs(spec, result, out_root, time.perf_counter() - start)
    return spec.name, result.passed, run_dir


def _run_spec_path(args):
    path, out_root = args
    spec = load_spec(path)
    try:
        return run_spec(spec, out_root) + (None,)
    except OpelabError as exc:
        return spec.name, False, None, _error_json(exc)


def read_suite(path):
    """Suite files hold a ``specs`` key listing config paths (relative to the suite file)."""
    with open(path) as fh:
        values = fock.parse_key_values(fh.read())
    unknown = set(values) - {"specs", "skip_slow"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown suite key {key!r}", key=key)
    base = os.path.dirname(os.path.abspath(path))
    specs = [os.path.join(base, p) for p in values.get("specs", "").replace(",", " ").split()]
    skip_slow = values.get("skip_slow", "false").strip().lower() in ("1", "true", "yes")
    return specs, skip_slow


def run_suite(path, out_root, workers=1, include_slow=True):
    specs, skip_slow = read_suite(path)
    loaded = [load_spec(p) for p in specs]  # validate everything before running anything
    if not loaded:
        print("warning: empty suite", file=sys.stderr)
    jobs = [(p, out_root) for p, s in zip(specs, loaded)
            if include_slow and not skip_slow or not s.flag("slow")]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_spec_path, jobs))
    else:
        results = [_run_spec_path(j) for j in jobs]
    summary = {
        "suite": os.path.basename(path),
        "passed": all(r[1] for r in results),
        "specs": [{"name": n, "passed": ok, "dir": os.path.relpath(d, out_root) if d else None,
                   "error": json.loads(err) if err else None} for n, ok, d, err in results],
    }
    os.makedirs(out_root, exist_ok=True)
    with open(os.path.join(out_root, "suite_report.json"), "w") as fh:
        fh.write(dumps(summary))
    return summary


def build_parser():
    parser = argparse.ArgumentParser(prog="opelab", description="Short-distance product experiments "
                                     "for a truncated free scalar field.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in KINDS + ("suite",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key=value config (suite: list of configs)")
        p.add_argument("--out", default="opelab_out", help="output root (OPELAB_OUT overrides)")
        p.add_argument("--workers", type=int, default=1)
        if name == "suite":
            p.add_argument("--skip-slow", action="store_true", help="skip specs marked slow = true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    out_root = os.environ.get("OPELAB_OUT") or args.out
    try:
        if args.command == "suite":
            summary = run_suite(args.config, out_root, max(1, args.workers), not args.skip_slow)
            for entry in summary["specs"]:
                print(f"{'PASS' if entry['passed'] else 'FAIL'} {entry['name']}")
            return 0 if summary["passed"] else EXIT_FAIL
        spec = load_spec(args.config, args.command)
        name, passed, run_dir = run_spec(spec, out_root)
        print(f"{'PASS' if passed else 'FAIL'} {name} -> {run_dir}")
        return 0 if passed else EXIT_FAIL
    except ConfigError as exc:
        print(_error_json(exc))
        return EXIT_CONFIG
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}))
        return EXIT_CONFIG
    except OpelabError as exc:
        print(_error_json(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
