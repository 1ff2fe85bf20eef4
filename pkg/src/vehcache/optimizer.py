"""Online cache placement: virtual delay queues, running energy efficiency,
drift-plus-penalty slot problems and the fractional-programming outer loop."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .catalog import CacheVector
from .energy import EnergyParams
from .errors import DimensionMismatch, DomainError, InfeasibleCapacity, MissingState, NonConvergence
from .interaction import InteractionRates, expected_delay, kappa1_from_rates

__all__ = [
    "VirtualQueues",
    "EfficiencyTracker",
    "SlotSnapshot",
    "SlotProblem",
    "DinkelbachResult",
    "update_virtual_queue",
    "update_eta",
    "build_slot_problem",
    "slot_objective",
    "solve_slot",
    "dinkelbach_solve_static",
    "diagnostics_bound",
]


def update_virtual_queue(h_n, d_n, d_av):
    """``max(h + d - d_av, 0)``; accepts scalars or arrays."""
    out = np.maximum(np.asarray(h_n, dtype=float) + np.asarray(d_n, dtype=float) - d_av, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class VirtualQueues:
    h: np.ndarray
    d_av: float

    @classmethod
    def zeros(cls, n_users: int, d_av: float) -> "VirtualQueues":
        if not d_av > 0:
            raise DomainError("d_av must be positive")
        return cls(np.zeros(n_users), float(d_av))

    def update(self, delays) -> np.ndarray:
        """Advance every queue by one slot; returns the excess ``e = D - D_av``."""
        d = np.asarray(delays, dtype=float)
        if d.shape != self.h.shape:
            raise DimensionMismatch(f"{d.size} delays for {self.h.size} queues")
        self.h = update_virtual_queue(self.h, d, self.d_av) if self.h.size else self.h
        return d - self.d_av

    @property
    def max_backlog(self) -> float:
        return float(self.h.max()) if self.h.size else 0.0


@dataclass(frozen=True)
class EfficiencyTracker:
    cumulative_energy: float = 0.0
    cumulative_bits: float = 0.0
    eta: float = 0.0


def update_eta(tracker: EfficiencyTracker, slot_energy: float, slot_bits: float) -> EfficiencyTracker:
    if slot_energy < 0 or slot_bits < 0:
        raise DomainError("slot energy and bits must be nonnegative")
    e = tracker.cumulative_energy + slot_energy
    b = tracker.cumulative_bits + slot_bits
    eta = e / b if b > 0 else tracker.eta
    return EfficiencyTracker(e, b, eta)


@dataclass(frozen=True)
class SlotSnapshot:
    """What the controller observes at the end of a slot.

    ``mean_log_mbs`` and ``mean_log_veh`` are user averages of
    ``log2(1 + sinr)`` on the MBS and D2D links.
    """

    rates: InteractionRates | None = None  # xi holds the base meeting rate
    cache_proportion: float | None = None
    popularity: np.ndarray | None = None
    q_current: np.ndarray | None = None
    q_previous: np.ndarray | None = None
    mean_log_mbs: float | None = None
    mean_log_veh: float | None = None
    n_users: int | None = None
    bandwidth_hz: float | None = None
    fragment_size_bits: float | None = None
    capacity_bits: float | None = None

    def require(self) -> None:
        missing = [f for f in self.__dataclass_fields__ if getattr(self, f) is None]
        if missing:
            raise MissingState(f"slot snapshot lacks {', '.join(missing)}")


@dataclass(frozen=True)
class SlotProblem:
    """Minimize ``sum_j c_j q_j`` plus a refill charge over the capacity polytope.

    When ``refill_penalty`` is given, raising ``q_j`` above ``q_previous[j]``
    costs an extra ``refill_penalty[j]`` per unit, which keeps the objective
    convex piecewise linear and the greedy exact.
    """

    linear_coeffs: np.ndarray
    capacity_bits: float
    fragment_size_bits: float
    v_param: float
    refill_penalty: np.ndarray | None = None
    q_previous: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self):
        n = self.linear_coeffs.shape[0]
        for arr in (self.refill_penalty, self.q_previous):
            if arr is not None and arr.shape != (n,):
                raise DimensionMismatch("slot problem vectors differ in length")
        if (self.refill_penalty is None) != (self.q_previous is None):
            raise DomainError("refill_penalty and q_previous come together")

    def objective(self, q) -> float:
        q = np.asarray(q, dtype=float)
        val = float(self.linear_coeffs @ q) + self.constant
        if self.refill_penalty is not None:
            val += float(self.refill_penalty @ np.maximum(q - self.q_previous, 0.0))
        return val


def _delay_slope(xi: float, lam: float, nu: float, omega: float) -> float:
    # dD/dxi for D = (nu - lam + xi) / (omega (nu - lam) + nu xi)
    a = nu - lam
    den = omega * a + nu * xi
    return (den - nu * (a + xi)) / den ** 2


def _kappa1_slope(xi: float, lam: float, nu: float) -> float:
    a = nu - lam
    return a / (xi + a) ** 2


def slot_objective(q, snap: SlotSnapshot, energy: EnergyParams, queues: VirtualQueues,
                   eta: float, v: float) -> float:
    """Drift-plus-penalty objective ``sum H D + V (P - eta R)`` at cache vector ``q``.

    Uses the same expected-throughput model as :func:`build_slot_problem`;
    vehicle transmit energy is omitted as it does not depend on ``q`` once
    anything is cached.
    """
    snap.require()
    r = snap.rates
    q = np.asarray(q, dtype=float)
    xi = r.xi * snap.cache_proportion * float(snap.popularity @ q)
    k1 = kappa1_from_rates(xi, r.lam, r.nu)
    scale = snap.bandwidth_hz * energy.slot_seconds * snap.n_users
    r_m = scale * (1 - k1) * snap.mean_log_mbs
    r_v = scale * k1 * snap.mean_log_veh
    pushed = snap.fragment_size_bits * float(np.maximum(q - snap.q_previous, 0.0).sum())
    power = (energy.mbs_rate_energy * r_m + energy.cache_rate_energy * energy.slot_seconds * r_v
             + energy.mbs_rate_energy * pushed)
    delay = expected_delay(xi, r.lam, r.nu, r.omega)
    return float(queues.h.sum() * delay + v * (power - eta * (r_m + r_v)))


def build_slot_problem(snap: SlotSnapshot, energy: EnergyParams, queues: VirtualQueues,
                       eta: float, v: float) -> SlotProblem:
    """Linearize the drift-plus-penalty objective around the current cache vector.

    Caching fragment ``j`` raises the effective meeting rate by
    ``xi_base * cp * p_j`` per unit of ``q_j``.  That shifts the vehicle share
    ``kappa1`` (moving bits from MBS links to D2D links) and the expected delay.
    Pushing new content into caches costs ``V * w_m * B`` per fragment.
    """
    snap.require()
    if v < 0:
        raise DomainError("v must be nonnegative")
    r = snap.rates
    p = np.asarray(snap.popularity, dtype=float)
    q = np.asarray(snap.q_current, dtype=float)
    if q.shape != p.shape or np.asarray(snap.q_previous).shape != p.shape:
        raise DimensionMismatch("cache vectors and popularity differ in length")
    dxi_dq = r.xi * snap.cache_proportion * p
    xi = float(dxi_dq @ q)

    scale = snap.bandwidth_hz * energy.slot_seconds * snap.n_users
    per_kappa = scale * ((energy.cache_rate_energy * energy.slot_seconds - eta) * snap.mean_log_veh
                         - (energy.mbs_rate_energy - eta) * snap.mean_log_mbs)
    penalty_slope = v * _kappa1_slope(xi, r.lam, r.nu) * per_kappa
    delay_slope = float(queues.h.sum()) * _delay_slope(xi, r.lam, r.nu, r.omega)
    coeffs = dxi_dq * (delay_slope + penalty_slope)
    refill = np.full(p.size, v * energy.mbs_rate_energy * snap.fragment_size_bits)
    return SlotProblem(coeffs, float(snap.capacity_bits), float(snap.fragment_size_bits), float(v),
                       refill_penalty=refill, q_previous=np.asarray(snap.q_previous, dtype=float))


def solve_slot(problem: SlotProblem) -> CacheVector:
    """Exact minimizer by fractional-knapsack greedy.

    Unit-weight items are taken in ascending coefficient order while the
    coefficient is negative, with the last one filled fractionally.  Equal
    coefficients go to the lower index first.
    """
    if not problem.capacity_bits > 0:
        raise InfeasibleCapacity("cache capacity must be positive")
    c = np.asarray(problem.linear_coeffs, dtype=float)
    n = c.size
    budget = problem.capacity_bits / problem.fragment_size_bits
    idx = np.arange(n)
    if problem.refill_penalty is None:
        seg_cost, seg_len, seg_idx, seg_ord = c, np.ones(n), idx, np.zeros(n, dtype=int)
    else:
        prev = np.clip(problem.q_previous, 0.0, 1.0)
        seg_cost = np.concatenate([c, c + problem.refill_penalty])
        seg_len = np.concatenate([prev, 1.0 - prev])
        seg_idx = np.concatenate([idx, idx])
        seg_ord = np.repeat([0, 1], n)
    keep = (seg_cost < 0) & (seg_len > 0)
    order = np.lexsort((seg_ord[keep], seg_idx[keep], seg_cost[keep]))
    q = np.zeros(n)
    left = budget
    for s_len, j in zip(seg_len[keep][order], seg_idx[keep][order]):
        if left <= 0:
            break
        take = min(s_len, left)
        q[j] += take
        left -= take
    return CacheVector(np.minimum(q, 1.0), float(problem.capacity_bits))


@dataclass(frozen=True)
class DinkelbachResult:
    q: object
    eta: float
    iterations: int
    eta_history: tuple = field(default=())
    residual: float = 0.0


def dinkelbach_solve_static(energy_fn: Callable, throughput_fn: Callable,
                            q_space: Sequence | Callable, tol: float = 1e-9,
                            max_iter: int = 100, q_init=None) -> DinkelbachResult:
    """Minimize ``P(q) / R(q)`` through the parametric problems ``min P - eta R``.

    ``q_space`` is either a finite sequence of candidates or a callable
    ``inner(eta) -> q`` returning a minimizer of ``P - eta R``.  The iteration
    starts from ``eta = P(q0) / R(q0)`` at a feasible point, so the eta sequence
    is nonincreasing; each step asserts it.  It stops once
    ``|P - eta R| <= tol * (|P| + |eta| R)``, a test independent of the units of eta.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if callable(q_space):
        inner = q_space
        q0 = inner(0.0) if q_init is None else q_init
    else:
        cands = list(q_space)
        if not cands:
            raise DomainError("q_space is empty")
        vals = [(float(energy_fn(c)), float(throughput_fn(c))) for c in cands]
        if any(r <= 0 for _, r in vals):
            raise DomainError("throughput must be positive on every candidate")

        def inner(eta):
            f = [pv - eta * rv for pv, rv in vals]
            return cands[int(np.argmin(f))]

        q0 = cands[0] if q_init is None else q_init

    r0 = float(throughput_fn(q0))
    if r0 <= 0:
        raise DomainError("throughput must be positive at the starting point")
    eta = float(energy_fn(q0)) / r0
    history = [eta]
    for it in range(1, max_iter + 1):
        q = inner(eta)
        p_q, r_q = float(energy_fn(q)), float(throughput_fn(q))
        if r_q <= 0:
            raise DomainError("throughput must be positive on the feasible set")
        resid = p_q - eta * r_q
        # relative to the terms' magnitude so tiny eta (J/bit) is not declared optimal early
        if abs(resid) <= tol * (abs(p_q) + abs(eta) * r_q):
            return DinkelbachResult(q, eta, it, tuple(history), abs(resid) / r_q)
        new_eta = p_q / r_q
        if new_eta > eta * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"eta increased from {eta!r} to {new_eta!r}")
        if new_eta >= eta:  # no progress: fixed point, e.g. when eta underflows
            return DinkelbachResult(q, eta, it, tuple(history), abs(resid) / r_q)
        eta = new_eta
        history.append(eta)
    raise NonConvergence(f"no convergence within {max_iter} iterations (eta={eta!r})")


def diagnostics_bound(b_estimate: float, v: float, r_star_estimate: float) -> float:
    """Gap term ``B / (V R*)`` between the achieved and optimal efficiency."""
    if not v > 0:
        raise DomainError("v must be positive")
    if not r_star_estimate > 0:
        raise DomainError("r_star_estimate must be positive")
    return b_estimate / (v * r_star_estimate)
