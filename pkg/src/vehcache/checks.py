"""Trend tests on replicated sweeps and the named checks behind ``vehcache verify``.

Replicated measurements are arrays of shape ``(n_points, n_replicates)`` whose
columns share a seed, so differences between neighbouring points are paired.
A step counts as a rise or a fall only when its mean paired difference exceeds
``z`` standard errors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VehCacheError
from .interaction import InteractionRates, expected_queue_lengths, service_split, solve_chain_auto
from .sim import ScenarioConfig, run_episode

__all__ = [
    "CheckResult",
    "step_signs",
    "is_nonincreasing",
    "is_unimodal",
    "saturates",
    "strictly_decreasing_after_peak",
    "run_check",
    "CHECKS",
]


def _paired(values) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return v[:, None] if v.ndim == 1 else v


def step_signs(values, z: float = 2.0) -> list[int]:
    """+1, -1 or 0 for every neighbouring pair of sweep points."""
    v = _paired(values)
    d = np.diff(v, axis=0)
    mean = d.mean(axis=1)
    n = v.shape[1]
    se = d.std(axis=1, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return [int(np.sign(m)) if abs(m) > z * s else 0 for m, s in zip(mean, se)]


def is_nonincreasing(values, z: float = 2.0) -> bool:
    return all(s <= 0 for s in step_signs(values, z))


def is_unimodal(values, z: float = 2.0) -> bool:
    """At least one significant rise, and no rise after the first fall."""
    signs = step_signs(values, z)
    if 1 not in signs:
        return False
    fallen = False
    for s in signs:
        if s < 0:
            fallen = True
        elif s > 0 and fallen:
            return False
    return True


def saturates(x, values, ratio: float = 0.5) -> bool:
    """Increasing curve whose slope over the last third is at most ``ratio`` of the first third."""
    x = np.asarray(x, dtype=float)
    m = _paired(values).mean(axis=1)
    k = max(len(x) // 3, 1)
    first = (m[k] - m[0]) / (x[k] - x[0])
    last = (m[-1] - m[-1 - k]) / (x[-1] - x[-1 - k])
    return bool(first > 0 and last <= ratio * first)


def strictly_decreasing_after_peak(values) -> bool:
    m = _paired(values).mean(axis=1)
    peak = int(np.argmax(m))
    return bool(np.all(np.diff(m[peak:]) < 0))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.measured}"


def _kappa_oracle(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    rates = InteractionRates(*params.get("rates", (1.0, 2.0, 1.0, 1.0)))
    chain = solve_chain_auto(rates)
    closed = service_split(rates).kappa1
    err = abs(chain.kappa1() - closed)
    return err <= tol, f"kappa1 closed={closed!r} chain={chain.kappa1()!r} abs_err={err:.3e}"


def _queue_oracle(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    rates = InteractionRates(*params.get("rates", (1.0, 2.0, 1.0, 1.0)))
    chain = solve_chain_auto(rates)
    l0, l1 = expected_queue_lengths(rates)
    e0 = abs(chain.cellular_queue_mean() - l0) / l0
    e1 = abs(chain.vehicle_mode_probability() - l1) / l1
    return max(e0, e1) <= tol, f"rel_err E[L0]={e0:.3e} E[L1]={e1:.3e}"


def _replicates(base: ScenarioConfig, path: str, values, seeds, metric: str, n_slots=None) -> np.ndarray:
    cfg = base if n_slots is None else base.with_value("n_slots", int(n_slots))
    out = np.empty((len(values), len(seeds)))
    for i, v in enumerate(values):
        for j, s in enumerate(seeds):
            m = run_episode(cfg.with_value(path, v).with_value("seed", int(s)))
            out[i, j] = getattr(m, metric)
    return out


def _monotone_in_v(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    vs = params.get("v_values", [5, 50, 500])
    seeds = params.get("seeds", [0, 1, 2])
    vals = _replicates(base, "control.v_param", [float(v) for v in vs], seeds,
                       params.get("metric", "eta_ee"), params.get("n_slots"))
    means = vals.mean(axis=1)
    rel_steps = np.diff(means) / means[:-1]
    ok = bool(np.all(rel_steps <= tol))
    return ok, f"means={[float(f'{m:.6g}') for m in means]} max_rel_step={rel_steps.max():.3e}"


def _policy_order(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    order = params.get("order", ["online", "offline", "none"])
    seeds = params.get("seeds", [0])
    vals = _replicates(base, "control.policy", order, seeds, params.get("metric", "eta_ee"),
                       params.get("n_slots")).mean(axis=1)
    ok = bool(np.all(np.diff(vals) > tol * vals[:-1]))
    return ok, " < ".join(f"{p}={v:.6g}" for p, v in zip(order, vals))


def _stability(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    cfg = base.with_value("n_slots", int(params.get("n_slots", 10_000)))
    m = run_episode(cfg.with_value("seed", int(params.get("seed", 0))))
    d_av = 1.0 / cfg.rates.omega
    ok = m.h_over_k < tol and m.mean_delay <= d_av * (1 + params.get("delay_slack", 0.05))
    return ok, f"maxH/K/D_av={m.h_over_k:.3e} mean_delay={m.mean_delay:.4f} D_av={d_av:.4f}"


def _metric_bounds(base: ScenarioConfig, params: dict, tol: float) -> tuple[bool, str]:
    m = run_episode(base.with_value("seed", int(params.get("seed", 0))))
    value = getattr(m, params["metric"])
    lo = params.get("min", -np.inf)
    hi = params.get("max", np.inf)
    return lo - tol <= value <= hi + tol, f"{params['metric']}={value!r} in [{lo}, {hi}]"


CHECKS = {
    "kappa_oracle": _kappa_oracle,
    "queue_oracle": _queue_oracle,
    "monotone_in_v": _monotone_in_v,
    "policy_order": _policy_order,
    "stability": _stability,
    "metric_bounds": _metric_bounds,
}


def run_check(entry: dict, base: ScenarioConfig) -> CheckResult:
    name = entry.get("name", entry.get("kind", "?"))
    kind = entry.get("kind")
    if kind not in CHECKS:
        return CheckResult(name, False, f"unknown check kind {kind!r}")
    try:
        ok, measured = CHECKS[kind](base, entry.get("params", {}), float(entry.get("tol", 0.0)))
    except (VehCacheError, ValueError, KeyError, TypeError) as exc:
        return CheckResult(name, False, f"error: {type(exc).__name__}: {exc}")
    return CheckResult(name, ok, measured)
