"""Vehicle-user contact dynamics as a two-dimensional Markov process.

A user's request backlog ``J`` evolves together with a connection mode ``K``.
In mode ``K=0`` pending requests wait on the cellular side, each leaving at
the tolerance-expiry rate ``omega`` (and then falling back to the MBS), while
a contact with a caching vehicle (rate ``xi``) moves the whole backlog to the
vehicle.  In mode ``K=1`` the vehicle serves requests one at a time at rate
``nu``; once the backlog empties the chain returns to ``(0, 0)``.

The closed forms are the production path.  :func:`solve_truncated_chain` and
:func:`advance_chains` exist to check them numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    DimensionMismatch,
    DomainError,
    SingularSystem,
    StabilityViolation,
    TruncationInsufficient,
)

__all__ = [
    "InteractionRates",
    "ServiceSplit",
    "TruncatedChain",
    "ChainState",
    "ChainSlotStats",
    "expected_queue_lengths",
    "service_split",
    "served_count_pmf",
    "solve_truncated_chain",
    "solve_chain_auto",
    "effective_meeting_rate",
    "kappa1_from_rates",
    "expected_delay",
    "advance_chains",
    "simulate_contact_chain",
]

TAIL_MASS_LIMIT = 1e-8


@dataclass(frozen=True)
class InteractionRates:
    """Rates of the contact chain, all in events per second."""

    lam: float
    nu: float
    xi: float
    omega: float

    def __post_init__(self):
        for name in ("lam", "nu", "xi", "omega"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"rate {name}={value!r} must be positive and finite")

    @property
    def denominator(self) -> float:
        return self.nu * self.omega + self.nu * self.xi - self.lam * self.omega

    def check_stable(self) -> None:
        if self.lam >= self.nu:
            raise StabilityViolation(
                f"arrival rate {self.lam} must be below vehicle service rate {self.nu}")
        if self.denominator <= 0:
            raise StabilityViolation(
                f"nu*omega + nu*xi - lam*omega = {self.denominator} must be positive")

    def replace(self, **changes) -> "InteractionRates":
        fields = dict(lam=self.lam, nu=self.nu, xi=self.xi, omega=self.omega)
        fields.update(changes)
        return InteractionRates(**fields)


@dataclass(frozen=True)
class ServiceSplit:
    e_l0: float
    e_l1: float
    kappa0: float
    kappa1: float

    @classmethod
    def from_lengths(cls, e_l0: float, e_l1: float) -> "ServiceSplit":
        total = e_l0 + e_l1
        kappa1 = e_l1 / total if total > 0 else 0.0
        return cls(e_l0=e_l0, e_l1=e_l1, kappa0=1.0 - kappa1, kappa1=kappa1)


def _lengths(lam: float, nu: float, xi: float, omega: float) -> tuple[float, float]:
    d = nu * omega + nu * xi - lam * omega
    return (lam * nu - lam * lam) / d, xi * lam / d


def expected_queue_lengths(rates: InteractionRates) -> tuple[float, float]:
    """Closed-form ``(E[L0], E[L1])`` of the stationary contact chain.

    ``E[L0]`` is the mean number of requests pending on the cellular side;
    ``E[L1]`` coincides with the stationary probability of vehicle mode, i.e.
    the mean number of requests in vehicle service.
    """
    rates.check_stable()
    return _lengths(rates.lam, rates.nu, rates.xi, rates.omega)


def service_split(rates: InteractionRates) -> ServiceSplit:
    e_l0, e_l1 = expected_queue_lengths(rates)
    return ServiceSplit.from_lengths(e_l0, e_l1)


def kappa1_from_rates(xi: float, lam: float, nu: float) -> float:
    """Vehicle-service probability ``xi / (xi + nu - lam)``; defined for ``xi >= 0``.

    Independent of ``omega``.  Used on the hot path where ``xi`` may be zero.
    """
    if xi < 0:
        raise DomainError("xi must be nonnegative")
    if lam >= nu:
        raise StabilityViolation(f"arrival rate {lam} must be below service rate {nu}")
    return xi / (xi + nu - lam)


def expected_delay(xi: float, lam: float, nu: float, omega: float) -> float:
    """Mean system time ``(E[L0] + E[L1]) / lam`` by Little's law (``xi >= 0``)."""
    if lam >= nu:
        raise StabilityViolation(f"arrival rate {lam} must be below service rate {nu}")
    e_l0, e_l1 = _lengths(lam, nu, xi, omega)
    return (e_l0 + e_l1) / lam


def served_count_pmf(n_users: int, kappa: float, n: int) -> float:
    """Binomial probability that exactly ``n`` of ``n_users`` are served in a mode."""
    if not 0.0 <= kappa <= 1.0:
        raise DomainError(f"kappa={kappa} outside [0, 1]")
    if n < 0 or n > n_users:
        raise DomainError(f"n={n} outside 0..{n_users}")
    return math.comb(n_users, n) * kappa ** n * (1.0 - kappa) ** (n_users - n)


def effective_meeting_rate(xi_base: float, q, p, cache_proportion: float) -> float:
    """Contact rate with vehicles that hold the requested fragment.

    ``xi_base * cache_proportion * sum_j p_j q_j``.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f"q has shape {q.shape}, p has shape {p.shape}")
    if not 0.0 <= cache_proportion <= 1.0:
        raise DomainError(f"cache_proportion={cache_proportion} outside [0, 1]")
    return float(xi_base * cache_proportion * np.dot(p, q))


@dataclass(frozen=True)
class TruncatedChain:
    """Stationary distribution of the contact chain cut at backlog ``j_max``.

    ``stationary[k, j]`` is ``P{K=k, J=j}``; ``stationary[1, 0]`` is always 0.
    """

    j_max: int
    stationary: np.ndarray
    rates: InteractionRates

    @property
    def tail_mass(self) -> float:
        return float(self.stationary[:, self.j_max].sum())

    def cellular_queue_mean(self) -> float:
        """``sum_n n P_0n``, the chain counterpart of ``E[L0]``."""
        n = np.arange(self.j_max + 1)
        return float(n @ self.stationary[0])

    def vehicle_mode_probability(self) -> float:
        """``sum_n P_1n`` (= ``G1(1)``), the chain counterpart of ``E[L1]``."""
        return float(self.stationary[1].sum())

    def vehicle_queue_mean(self) -> float:
        """``sum_n n P_1n``: full backlog held in vehicle mode (not the closed-form ``E[L1]``)."""
        n = np.arange(self.j_max + 1)
        return float(n @ self.stationary[1])

    def kappa1(self) -> float:
        e_l0 = self.cellular_queue_mean()
        e_l1 = self.vehicle_mode_probability()
        return e_l1 / (e_l0 + e_l1)

    def balance_residuals(self) -> np.ndarray:
        """Residuals of the balance equations on interior states ``j < j_max``."""
        lam, nu, xi, omega = self.rates.lam, self.rates.nu, self.rates.xi, self.rates.omega
        p0, p1 = self.stationary
        jm = self.j_max
        res = []
        # K=1, J=1
        res.append((lam + nu) * p1[1] - nu * p1[2] - xi * p0[1])
        for n in range(2, jm):
            res.append((lam + nu) * p1[n] - lam * p1[n - 1] - nu * p1[n + 1] - xi * p0[n])
        # K=0, J=0
        res.append(lam * p0[0] - nu * p1[1] - omega * p0[1])
        for n in range(1, jm):
            res.append((lam + n * omega + xi) * p0[n] - lam * p0[n - 1] - (n + 1) * omega * p0[n + 1])
        return np.asarray(res)


def _generator(rates: InteractionRates, j_max: int) -> sp.csr_matrix:
    lam, nu, xi, omega = rates.lam, rates.nu, rates.xi, rates.omega
    n0 = j_max + 1
    size = n0 + j_max

    def i0(j):
        return j

    def i1(j):
        return n0 + j - 1

    rows, cols, vals = [], [], []

    def add(a, b, r):
        rows.append(a)
        cols.append(b)
        vals.append(r)

    for j in range(j_max + 1):
        if j < j_max:
            add(i0(j), i0(j + 1), lam)
        if j >= 1:
            add(i0(j), i0(j - 1), j * omega)
            add(i0(j), i1(j), xi)
    for j in range(1, j_max + 1):
        if j < j_max:
            add(i1(j), i1(j + 1), lam)
        add(i1(j), i1(j - 1) if j >= 2 else i0(0), nu)
    q = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    out = np.asarray(q.sum(axis=1)).ravel()
    return (q - sp.diags(out)).tocsr()


def solve_truncated_chain(rates: InteractionRates, j_max: int) -> TruncatedChain:
    """Direct stationary solve of the chain truncated at backlog ``j_max``."""
    if j_max < 10:
        raise DomainError("j_max must be at least 10")
    rates.check_stable()
    q = _generator(rates, j_max)
    size = q.shape[0]
    a = q.T.tolil()
    a[0, :] = np.ones(size)
    b = np.zeros(size)
    b[0] = 1.0
    try:
        pi = spla.spsolve(a.tocsc(), b)
    except Exception as exc:  # pragma: no cover - scipy raises several types
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(pi)):
        raise SingularSystem("stationary solve returned non-finite values")
    pi = np.where(np.abs(pi) < 1e-300, 0.0, pi)
    if pi.min() < -1e-12:
        raise SingularSystem(f"stationary solve returned negative mass {pi.min()}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    stationary = np.zeros((2, j_max + 1))
    stationary[0] = pi[: j_max + 1]
    stationary[1, 1:] = pi[j_max + 1:]
    chain = TruncatedChain(j_max=j_max, stationary=stationary, rates=rates)
    if chain.tail_mass >= TAIL_MASS_LIMIT:
        raise TruncationInsufficient(
            f"tail mass {chain.tail_mass:.3e} at j_max={j_max} exceeds {TAIL_MASS_LIMIT}")
    return chain


def solve_chain_auto(rates: InteractionRates, j_max: int = 16, limit: int = 1 << 16) -> TruncatedChain:
    """Solve with ``j_max`` doubled until the boundary mass is negligible."""
    while True:
        try:
            return solve_truncated_chain(rates, j_max)
        except TruncationInsufficient:
            if j_max >= limit:
                raise
            j_max *= 2


# --------------------------------------------------------------------------
# event simulation


@dataclass
class ChainState:
    """Per-user chain state carried across slots."""

    k: np.ndarray
    j: np.ndarray

    @classmethod
    def empty(cls, n_users: int) -> "ChainState":
        return cls(k=np.zeros(n_users, dtype=np.int8), j=np.zeros(n_users, dtype=np.int64))

    def copy(self) -> "ChainState":
        return ChainState(self.k.copy(), self.j.copy())


@dataclass
class ChainSlotStats:
    """What happened to each user's chain during one interval."""

    cellular_occupancy: np.ndarray  # integral of J * 1{K=0} dt
    vehicle_occupancy: np.ndarray   # integral of 1{K=1} dt
    backlog_integral: np.ndarray    # integral of J dt
    arrivals: np.ndarray
    vehicle_served: np.ndarray
    cellular_served: np.ndarray
    backlog_start: np.ndarray
    backlog_end: np.ndarray


def advance_chains(state: ChainState, lam: float, nu: float, xi: float, omega: float,
                   duration: float, rng: np.random.Generator) -> ChainSlotStats:
    """Run every user's chain forward by ``duration`` seconds (in place).

    Exact event simulation with exponential clocks, vectorized across users.
    ``xi`` may be zero (no caching).
    """
    n = state.k.size
    occ0 = np.zeros(n)
    occ1 = np.zeros(n)
    occ = np.zeros(n)
    arrivals = np.zeros(n, dtype=np.int64)
    veh = np.zeros(n, dtype=np.int64)
    cell = np.zeros(n, dtype=np.int64)
    start = state.j.copy()
    t_left = np.full(n, float(duration))
    alive = np.arange(n)
    while alive.size:
        k = state.k[alive]
        j = state.j[alive]
        in0 = k == 0
        busy0 = in0 & (j > 0)
        r_exp = np.where(busy0, j * omega, 0.0)
        r_con = np.where(busy0, xi, 0.0)
        r_srv = np.where(in0, 0.0, nu)
        total = lam + r_exp + r_con + r_srv
        dt = rng.standard_exponential(alive.size) / total
        tl = t_left[alive]
        go = dt < tl
        hold = np.where(go, dt, tl)
        occ0[alive] += np.where(in0, j, 0) * hold
        occ1[alive] += np.where(in0, 0.0, hold)
        occ[alive] += j * hold
        t_left[alive] = tl - hold

        u = rng.random(alive.size) * total
        c1 = lam
        c2 = c1 + r_exp
        c3 = c2 + r_con
        e_arr = go & (u < c1)
        e_exp = go & ~e_arr & (u < c2)
        e_con = go & ~e_arr & ~e_exp & (u < c3)
        e_srv = go & ~in0 & ~e_arr & ~e_exp & ~e_con

        j = j + e_arr - e_exp - e_srv
        k = np.where(e_con, 1, k)
        k = np.where(e_srv & (j == 0), 0, k)
        state.j[alive] = j
        state.k[alive] = k
        arrivals[alive] += e_arr
        cell[alive] += e_exp
        veh[alive] += e_srv
        alive = alive[go]
    return ChainSlotStats(occ0, occ1, occ, arrivals, veh, cell, start, state.j.copy())


@dataclass(frozen=True)
class ContactChainEstimate:
    occupancy_kappa1: float
    request_vehicle_fraction: float
    mean_cellular_queue: float
    mean_vehicle_mode: float
    requests: int


def simulate_contact_chain(rates: InteractionRates, n_requests: int, rng: np.random.Generator,
                           n_users: int = 1000, horizon: float = 1.0,
                           burn_in: float = 20.0) -> ContactChainEstimate:
    """Monte-Carlo estimate of the chain's service split from many independent users.

    ``occupancy_kappa1`` estimates ``E[L1] / (E[L0] + E[L1])`` as a time
    average; ``request_vehicle_fraction`` is the share of completed requests
    served by a vehicle.
    """
    state = ChainState.empty(n_users)
    advance_chains(state, rates.lam, rates.nu, rates.xi, rates.omega, burn_in, rng)
    occ0 = occ1 = 0.0
    veh = cell = arrived = 0
    elapsed = 0.0
    while arrived < n_requests:
        st = advance_chains(state, rates.lam, rates.nu, rates.xi, rates.omega, horizon, rng)
        occ0 += st.cellular_occupancy.sum()
        occ1 += st.vehicle_occupancy.sum()
        veh += int(st.vehicle_served.sum())
        cell += int(st.cellular_served.sum())
        arrived += int(st.arrivals.sum())
        elapsed += horizon
    user_time = elapsed * n_users
    return ContactChainEstimate(
        occupancy_kappa1=occ1 / (occ0 + occ1),
        request_vehicle_fraction=veh / max(veh + cell, 1),
        mean_cellular_queue=occ0 / user_time,
        mean_vehicle_mode=occ1 / user_time,
        requests=arrived,
    )
