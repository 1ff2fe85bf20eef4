"""Command-line entry point: ``vehcache run|verify|sweep-list``.

``run`` writes ``metrics.csv`` (one row per sweep point and seed),
``summary.csv`` (mean and standard error per sweep point) and
``manifest.json`` (resolved config, seeds, code version) to the output
directory.  Feeding the manifest back to ``run`` reproduces ``metrics.csv``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import subprocess
import sys
from dataclasses import fields, replace
from importlib import metadata
from pathlib import Path

import numpy as np

from .checks import run_check
from .config import ExperimentSpec, load_config
from .errors import ParseError, ValidationError
from .sim import METRIC_FIELDS, SlotLedger, sweep

__all__ = ["main", "run_experiment", "verify", "code_version", "METRICS_COLUMNS"]

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3, 1


def code_version() -> str:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{version}+{rev}" if rev else version


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


METRICS_COLUMNS = ("row", "seed") + METRIC_FIELDS + ("error",)


def _metrics_table(spec: ExperimentSpec, rows) -> str:
    axes = [name for name, _ in spec.sweep]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", *axes, "seed", *METRIC_FIELDS, "error"])
    for i, (point, seed, res) in enumerate(rows):
        metrics = res.metrics.row() if res.metrics else {k: None for k in METRIC_FIELDS}
        w.writerow([i, *(_fmt(point[a]) for a in axes), seed,
                    *(_fmt(metrics[k]) for k in METRIC_FIELDS), res.error or ""])
    return buf.getvalue()


def _summary_table(spec: ExperimentSpec, rows) -> str:
    axes = [name for name, _ in spec.sweep]
    groups: dict[tuple, list] = {}
    for point, _, res in rows:
        groups.setdefault(tuple(point[a] for a in axes), []).append(res)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [*axes, "n", "n_failed"]
    for k in METRIC_FIELDS:
        header += [f"{k}_mean", f"{k}_stderr"]
    w.writerow(header)
    for key, results in groups.items():
        ok = [r.metrics for r in results if r.metrics is not None]
        line = [*(_fmt(v) for v in key), len(results), len(results) - len(ok)]
        for k in METRIC_FIELDS:
            vals = np.array([float(getattr(m, k)) for m in ok])
            if vals.size == 0:
                line += ["", ""]
                continue
            se = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
            line += [_fmt(vals.mean()), _fmt(se)]
        w.writerow(line)
    return buf.getvalue()


def _write_traces(out: Path, rows) -> None:
    tdir = out / "traces"
    tdir.mkdir(exist_ok=True)
    names = [f.name for f in fields(SlotLedger)]
    for i, (_, _, res) in enumerate(rows):
        if res.metrics is None or res.metrics.traces is None:
            continue
        tr = res.metrics.traces
        with open(tdir / f"row_{i:05d}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for t in range(len(tr[names[0]])):
                w.writerow([_fmt(tr[n][t].item()) for n in names])


def run_experiment(spec: ExperimentSpec, out_dir: str | None = None, threads: int = 1) -> int:
    """Run every sweep point for every seed and write the artifacts; returns an exit code."""
    out = Path(out_dir or spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(point, seed) for point in spec.grid() for seed in spec.seeds]
    results = sweep([spec.scenario(p, s) for p, s in jobs], threads=threads, keep_traces=spec.emit_traces)
    rows = [(p, s, r) for (p, s), r in zip(jobs, results)]

    (out / "metrics.csv").write_text(_metrics_table(spec, rows))
    (out / "summary.csv").write_text(_summary_table(spec, rows))
    if spec.emit_traces:
        _write_traces(out, rows)
    manifest = {
        "code_version": code_version(),
        "config": spec.resolved(),
        "seeds": list(spec.seeds),
        "rows": len(rows),
        "failed_rows": [i for i, (_, _, r) in enumerate(rows) if r.error],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_PARTIAL if manifest["failed_rows"] else EXIT_OK


def verify(spec: ExperimentSpec, expectations_path, stream=sys.stdout) -> int:
    try:
        data = json.loads(Path(expectations_path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{expectations_path}: line {exc.lineno}: {exc.msg}") from exc
    checks = data.get("checks") if isinstance(data, dict) else None
    if not isinstance(checks, list):
        raise ParseError(f"{expectations_path}: expected an object with a 'checks' list")
    results = [run_check(entry, spec.base) for entry in checks]
    for r in results:
        print(r.line(), file=stream)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} checks passed", file=stream)
    return EXIT_OK if n_ok == len(results) else EXIT_VERIFY


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vehcache", description="Vehicular edge-caching simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="run this single seed instead of the config's seeds")
    common.add_argument("--out-dir", help="override the config's output directory")
    common.add_argument("--threads", type=int, default=1, help="worker processes for the sweep")
    common.add_argument("--emit-traces", action="store_true", help="write per-slot traces")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a sweep and write CSV/JSON artifacts")
    p.add_argument("config")
    p = sub.add_parser("verify", parents=[common], help="run named checks from an expectations file")
    p.add_argument("config")
    p.add_argument("expectations")
    p = sub.add_parser("sweep-list", parents=[common], help="print the resolved sweep grid")
    p.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        spec = load_config(args.config)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        spec = replace(spec, seeds=(args.seed,))
    if args.emit_traces:
        spec = replace(spec, emit_traces=True)

    if args.command == "sweep-list":
        for i, point in enumerate(spec.grid()):
            for seed in spec.seeds:
                desc = " ".join(f"{k}={_fmt(v)}" for k, v in point.items())
                print(f"{i}\tseed={seed}\t{desc}".rstrip())
        return EXIT_OK
    if args.command == "run":
        return run_experiment(spec, args.out_dir, args.threads)
    try:
        return verify(spec, args.expectations)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
