"""Run the reference parameter sweeps and print their trend summaries.

Usage::

    python scripts/run_sweeps.py [--threads N] [--only arrival capacity ...] [--summarize-only]

Each sweep writes metrics.csv, summary.csv and manifest.json under
``results/<name>/`` through the ``vehcache run`` command.
"""
from __future__ import annotations

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import numpy as np

from vehcache.checks import is_nonincreasing, is_unimodal, saturates, step_signs, strictly_decreasing_after_peak
from vehcache.cli import main as cli_main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = {
    "arrival": "eta_vs_arrival_rate",
    "capacity": "gap_vs_capacity",
    "proportion": "cache_proportion",
    "v": "v_tradeoff",
}


def load_rows(name: str) -> list[dict]:
    with open(ROOT / "results" / name / "metrics.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def table(rows, x: str, metric: str, **fixed) -> tuple[list, np.ndarray]:
    """Replicate matrix ``(n_x, n_seeds)`` of ``metric`` for rows matching ``fixed``."""
    groups = defaultdict(dict)
    for r in rows:
        if r["error"] or any(r[k] != str(v) for k, v in fixed.items()):
            continue
        groups[float(r[x])][int(r["seed"])] = float(r[metric])
    xs = sorted(groups)
    seeds = sorted(set.intersection(*(set(groups[v]) for v in xs)))
    return xs, np.array([[groups[v][s] for s in seeds] for v in xs])


def fmt(values) -> str:
    return " ".join(f"{v:.4g}" for v in values)


def summarize_arrival():
    rows = load_rows(CONFIGS["arrival"])
    for policy in ("online", "offline", "none"):
        xs, m = table(rows, "rates.lam", "eta_ee", **{"control.policy": policy})
        print(f"eta_ee {policy:8s} lam={xs}: {fmt(m.mean(axis=1))}  steps {step_signs(m)}")


def summarize_capacity():
    rows = load_rows(CONFIGS["capacity"])
    xs, on = table(rows, "catalog.normalized_capacity", "eta_ee", **{"control.policy": "online"})
    _, off = table(rows, "catalog.normalized_capacity", "eta_ee", **{"control.policy": "offline"})
    gap = off - on
    print(f"capacity={xs}")
    print(f"  online {fmt(on.mean(axis=1))}\n  offline {fmt(off.mean(axis=1))}")
    print(f"  gap {fmt(gap.mean(axis=1))} steps {step_signs(gap)} unimodal {is_unimodal(gap)}")


def summarize_proportion():
    rows = load_rows(CONFIGS["proportion"])
    for lam in ("1.0", "2.0"):
        for metric in ("hit_ratio", "cache_utilization", "system_gain", "eta_ee"):
            for policy in ("online", "offline"):
                xs, m = table(rows, "population.cache_proportion", metric,
                              **{"control.policy": policy, "rates.lam": lam})
                extra = ""
                if metric == "system_gain":
                    extra = f" saturates {saturates(xs, m)}"
                elif metric == "cache_utilization":
                    mean = m.mean(axis=1)
                    extra = (f" spread {mean.max() - mean.min():.3f}"
                             f" decreasing after peak {strictly_decreasing_after_peak(m)}")
                print(f"lam={lam} {metric:17s} {policy:8s} {fmt(m.mean(axis=1))}{extra}")


def summarize_v():
    rows = load_rows(CONFIGS["v"])
    for mode in ("analytical", "empirical"):
        xs, eta = table(rows, "control.v_param", "eta_ee", **{"control.delay_mode": mode})
        _, h = table(rows, "control.v_param", "max_h", **{"control.delay_mode": mode})
        print(f"V sweep ({mode}) V={xs}\n  eta {fmt(eta.mean(axis=1))} nonincreasing {is_nonincreasing(eta)}"
              f"\n  max H {fmt(h.mean(axis=1))}")


SUMMARIES = {"arrival": summarize_arrival, "capacity": summarize_capacity, "proportion": summarize_proportion,
             "v": summarize_v}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(CONFIGS), default=sorted(CONFIGS))
    ap.add_argument("--summarize-only", action="store_true")
    args = ap.parse_args()
    for key in args.only:
        name = CONFIGS[key]
        if not args.summarize_only:
            code = cli_main(["run", str(ROOT / "configs" / f"{name}.json"),
                             "--out-dir", str(ROOT / "results" / name), "--threads", str(args.threads)])
            if code not in (0, 2):
                raise SystemExit(code)
        SUMMARIES[key]()


if __name__ == "__main__":
    main()
