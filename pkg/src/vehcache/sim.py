"""Slotted Monte-Carlo engine for a single cell with caching vehicles.

Each episode draws a persistent user population and vehicle fleet, then runs
``n_slots`` slots of one second (by default).  In every slot the engine

1. possibly promotes a tail fragment to the top of the popularity ranking,
2. redraws user positions and contact-vehicle geometry and computes SINRs,
3. advances every user's contact chain at the meeting rate implied by the
   current cache vector,
4. books throughput, energy, delay and hit counters, and
5. lets the caching policy choose the cache vector of the next slot.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
import math

import numpy as np
import scipy.sparse as sp

from .catalog import Catalog
from .energy import EnergyParams, mbs_energy, total_energy, vehicle_energy
from .errors import DomainError, VehCacheError
from .interaction import (
    ChainState,
    InteractionRates,
    advance_chains,
    effective_meeting_rate,
    expected_delay,
    kappa1_from_rates,
)
from .optimizer import (
    EfficiencyTracker,
    SlotSnapshot,
    VirtualQueues,
    build_slot_problem,
    diagnostics_bound,
    dinkelbach_solve_static,
    solve_slot,
    update_eta,
)
from .phy import LinkState, RadioParams, channel_gain, sinr_mbs_all, sinr_vehicle_all

__all__ = [
    "PopulationConfig",
    "CatalogConfig",
    "ControlConfig",
    "ScenarioConfig",
    "UserSet",
    "VehicleSet",
    "SlotLedger",
    "EpisodeMetrics",
    "Episode",
    "SweepRow",
    "POLICIES",
    "spawn_users",
    "spawn_vehicles",
    "run_slot",
    "run_episode",
    "sweep",
]

POLICIES = ("online", "offline", "none")
DELAY_MODES = ("analytical", "empirical")
STREAMS = ("users", "fleet", "geometry", "reuse", "churn", "chain", "hits")


@dataclass(frozen=True)
class PopulationConfig:
    user_intensity: float = 20.0
    vehicle_count_mean: float = 30.0
    cache_proportion: float = 0.5
    road_lanes: int = 4
    lane_spacing_m: float = 3.5

    def __post_init__(self):
        if self.user_intensity < 0 or self.vehicle_count_mean < 0:
            raise DomainError("intensities must be nonnegative")
        if not 0.0 <= self.cache_proportion <= 1.0:
            raise DomainError("cache_proportion must lie in [0, 1]")
        if self.road_lanes < 1 or self.lane_spacing_m < 0:
            raise DomainError("road needs at least one lane and nonnegative spacing")


@dataclass(frozen=True)
class CatalogConfig:
    n_fragments: int = 1000
    fragment_size_bits: float = 1e7
    zipf_exponent: float = 0.7
    # per-vehicle storage as a fraction of the whole catalog
    normalized_capacity: float = 0.01

    def __post_init__(self):
        if self.n_fragments < 1 or not self.fragment_size_bits > 0 or self.zipf_exponent < 0:
            raise DomainError("invalid catalog parameters")
        if not 0.0 < self.normalized_capacity <= 1.0:
            raise DomainError("normalized_capacity must lie in (0, 1]")

    @property
    def capacity_bits(self) -> float:
        return self.normalized_capacity * self.n_fragments * self.fragment_size_bits

    def build(self) -> Catalog:
        return Catalog.zipf(self.n_fragments, self.fragment_size_bits, self.zipf_exponent)


@dataclass(frozen=True)
class ControlConfig:
    policy: str = "online"
    v_param: float = 50.0
    offline_update_interval_slots: int = 86400
    # "analytical": Little's-law delay at the current meeting rate;
    # "empirical": measured backlog integral per slot
    delay_mode: str = "analytical"
    # per-slot probability that a random fragment jumps to the top rank
    popularity_shift_rate: float = 0.005
    # cache-utilization window; defaults to the offline update interval
    utilization_window_slots: int | None = None
    # hold the meeting rate at this value regardless of the cache vector
    fixed_xi_eff: float | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise DomainError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.delay_mode not in DELAY_MODES:
            raise DomainError(f"delay_mode must be one of {DELAY_MODES}")
        if self.v_param < 0:
            raise DomainError("v_param must be nonnegative")
        if self.offline_update_interval_slots < 1:
            raise DomainError("offline_update_interval_slots must be at least 1")
        if not 0.0 <= self.popularity_shift_rate <= 1.0:
            raise DomainError("popularity_shift_rate must lie in [0, 1]")
        if self.utilization_window_slots is not None and self.utilization_window_slots < 1:
            raise DomainError("utilization_window_slots must be at least 1")
        if self.fixed_xi_eff is not None and not self.fixed_xi_eff >= 0:
            raise DomainError("fixed_xi_eff must be nonnegative")

    @property
    def window_slots(self) -> int:
        if self.utilization_window_slots is None:
            return self.offline_update_interval_slots
        return self.utilization_window_slots


@dataclass(frozen=True)
class ScenarioConfig:
    population: PopulationConfig = field(default_factory=PopulationConfig)
    rates: InteractionRates = field(default_factory=lambda: InteractionRates(1.0, 3.0, 16.0, 1.0))
    catalog: CatalogConfig = field(default_factory=CatalogConfig)
    radio: RadioParams = field(default_factory=RadioParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    control: ControlConfig = field(default_factory=ControlConfig)
    n_slots: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.n_slots < 1:
            raise DomainError("n_slots must be at least 1")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        self.rates.check_stable()

    def with_value(self, path: str, value) -> "ScenarioConfig":
        """Copy with the dotted field ``path`` (e.g. ``"rates.lam"``) set to ``value``."""
        head, _, rest = path.partition(".")
        if head not in {f.name for f in fields(self)}:
            raise KeyError(path)
        if not rest:
            return replace(self, **{head: value})
        section = getattr(self, head)
        if rest not in {f.name for f in fields(section)}:
            raise KeyError(path)
        return replace(self, **{head: replace(section, **{rest: value})})

    def get_value(self, path: str):
        obj = self
        for part in path.split("."):
            obj = getattr(obj, part)
        return obj

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class UserSet:
    positions: np.ndarray

    @property
    def count(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class VehicleSet:
    positions: np.ndarray
    caching: np.ndarray

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def n_caching(self) -> int:
        return int(self.caching.sum())


def _uniform_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = rng.uniform(0.0, 2 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def spawn_users(intensity: float, radius: float, rng: np.random.Generator) -> UserSet:
    """Poisson number of users placed uniformly on the disk of ``radius``."""
    if intensity < 0:
        raise DomainError("intensity must be nonnegative")
    n = int(rng.poisson(intensity))
    return UserSet(_uniform_disk(n, radius, rng))


def spawn_vehicles(mean_count: float, cache_proportion: float, radius: float,
                   rng: np.random.Generator, lanes: int = 4, lane_spacing_m: float = 3.5) -> VehicleSet:
    """Poisson fleet on a straight multi-lane road through the cell centre.

    Each vehicle independently carries a cache with probability ``cache_proportion``.
    """
    if mean_count < 0:
        raise DomainError("mean_count must be nonnegative")
    if not 0.0 <= cache_proportion <= 1.0:
        raise DomainError("cache_proportion must lie in [0, 1]")
    n = int(rng.poisson(mean_count))
    u = rng.uniform(-1.0, 1.0, n)
    lane = rng.integers(0, lanes, n)
    y = (lane - (lanes - 1) / 2) * lane_spacing_m
    x = u * np.sqrt(np.maximum(radius ** 2 - y ** 2, 0.0))  # each lane is a chord of the cell
    caching = rng.random(n) < cache_proportion
    return VehicleSet(np.column_stack([x, y]), caching)


@dataclass(frozen=True)
class SlotLedger:
    slot: int
    r_mbs: float
    r_veh: float
    r_novc: float
    p_mbs: float
    p_veh_tx: float
    p_cache: float
    p_backhaul: float
    p_novc: float
    arrivals: int
    vehicle_served: int
    cellular_served: int
    backlog_integral: float
    xi_eff: float
    cached_mass: float
    cached_fragments: float
    mean_delay: float
    max_h: float
    eta: float

    @property
    def r_total(self) -> float:
        return self.r_mbs + self.r_veh

    @property
    def p_total(self) -> float:
        return self.p_mbs + self.p_veh_tx + self.p_cache + self.p_backhaul


METRIC_FIELDS = (
    "eta_ee", "hit_ratio", "cache_utilization", "system_gain", "eta_novc", "mean_delay",
    "mean_model_delay", "vehicle_share", "max_h", "h_over_k", "b_estimate", "bound_gap", "requests",
    "vehicle_served", "cellular_served", "n_users", "n_vehicles", "n_caching",
    "mean_cached_mass",
)


@dataclass(frozen=True)
class EpisodeMetrics:
    eta_ee: float
    hit_ratio: float
    cache_utilization: float
    system_gain: float
    eta_novc: float
    mean_delay: float
    mean_model_delay: float
    vehicle_share: float
    max_h: float
    h_over_k: float
    b_estimate: float
    bound_gap: float
    requests: int
    vehicle_served: int
    cellular_served: int
    n_users: int
    n_vehicles: int
    n_caching: int
    mean_cached_mass: float
    traces: dict | None = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in METRIC_FIELDS}


class CopyUsage:
    """Tracks which per-vehicle fragment copies are read within fixed windows.

    With ``n`` caching vehicles and cache vector ``q``, fragment ``j`` is held
    by the ``round(q_j n)`` vehicles ``(j + r) mod n`` for ``r`` below that count.
    """

    def __init__(self, n_caching: int, window: int):
        self.n = n_caching
        self.window = window
        self.held: set = set()
        self.accessed: set = set()
        self.ratios: list[float] = []
        self.copies = np.zeros(0, dtype=np.int64)

    def hold(self, q: np.ndarray) -> None:
        if self.n == 0:
            self.copies = np.zeros(q.size, dtype=np.int64)
            return
        self.copies = np.rint(q * self.n).astype(np.int64)
        for j in np.flatnonzero(self.copies):
            self.held.update((int(j), int((j + r) % self.n)) for r in range(self.copies[j]))

    def access(self, fragments: np.ndarray, draws: np.ndarray) -> None:
        for j, u in zip(fragments, draws):
            r = int(u * self.copies[j])
            self.accessed.add((int(j), int((j + r) % self.n)))

    def close_window(self) -> None:
        if self.held:
            self.ratios.append(len(self.accessed & self.held) / len(self.held))
        self.held = set()
        self.accessed = set()

    @property
    def utilization(self) -> float:
        return float(np.mean(self.ratios)) if self.ratios else 0.0


class Episode:
    """State of one simulated episode; call :meth:`step` once per slot."""

    def __init__(self, config: ScenarioConfig, keep_traces: bool = False):
        self.config = config
        cfg = config
        seeds = np.random.SeedSequence(cfg.seed).spawn(len(STREAMS))
        self.rng = {name: np.random.default_rng(s) for name, s in zip(STREAMS, seeds)}
        radius = cfg.radio.cell_radius_m
        self.users = spawn_users(cfg.population.user_intensity, radius, self.rng["users"])
        self.fleet = spawn_vehicles(cfg.population.vehicle_count_mean, cfg.population.cache_proportion,
                                    radius, self.rng["fleet"], cfg.population.road_lanes,
                                    cfg.population.lane_spacing_m)
        self.n_users = self.users.count
        self.n_caching = self.fleet.n_caching
        self.cp_realized = self.n_caching / self.fleet.count if self.fleet.count else 0.0

        self.catalog = cfg.catalog.build()
        self.base_popularity = self.catalog.popularity
        self.ranking = np.arange(self.catalog.n_fragments)  # fragment at each rank
        self.popularity = self.base_popularity.copy()
        self.capacity_bits = cfg.catalog.capacity_bits

        self.chains = ChainState.empty(self.n_users)
        self.queues = VirtualQueues.zeros(self.n_users, 1.0 / cfg.rates.omega)
        self.tracker = EfficiencyTracker()
        self.q = np.zeros(self.catalog.n_fragments)
        self.q_held = self.q.copy()  # cache contents before the last push
        self.slot = 0
        self.usage = CopyUsage(self.n_caching, cfg.control.window_slots)
        self.usage.hold(self.q)
        self.keep_traces = keep_traces
        self.ledgers: list[SlotLedger] = []

        self.totals = dict(r=0.0, r_novc=0.0, p_novc=0.0, arrivals=0, veh=0, cell=0,
                           backlog=0.0, occ0=0.0, occ1=0.0, model_delay=0.0, cached_mass=0.0, e2=0.0)

    # -- environment ------------------------------------------------------
    def _churn(self) -> None:
        rng = self.rng["churn"]
        hit = rng.random() < self.config.control.popularity_shift_rate
        rank = int(rng.integers(1, max(self.catalog.n_fragments, 2)))
        if hit and self.catalog.n_fragments > 1:
            frag = self.ranking[rank]
            self.ranking = np.concatenate([[frag], np.delete(self.ranking, rank)])
            self.popularity = np.empty_like(self.base_popularity)
            self.popularity[self.ranking] = self.base_popularity

    def _links(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """SINRs ``(mbs, d2d, mbs without reuse)`` for every user this slot."""
        radio = self.config.radio
        n = self.n_users
        geo = self.rng["geometry"]
        users = _uniform_disk(n, radio.cell_radius_m, geo)
        contact = users + _uniform_disk(n, radio.d2d_range_m, geo)
        d_mbs = np.maximum(np.hypot(users[:, 0], users[:, 1]), 1.0)
        g_mbs = channel_gain(d_mbs, radio)

        rr = self.rng["reuse"]
        reuse_draw = rr.random(n)
        target = rr.integers(0, max(n - 1, 1), n)
        target = target + (target >= np.arange(n))  # any channel but the vehicle's own user
        reuses = np.flatnonzero((self.chains.k == 1) & (reuse_draw < radio.reuse_probability) & (n > 1))
        # only own links and reused channels carry power, so keep just those pairs
        rows = np.concatenate([np.arange(n), reuses])
        cols = np.concatenate([np.arange(n), target[reuses]])
        d_pair = np.hypot(contact[rows, 0] - users[cols, 0], contact[rows, 1] - users[cols, 1])
        g_pair = channel_gain(np.maximum(d_pair, 1.0), radio)
        g_vu = sp.csr_matrix((g_pair, (rows, cols)), shape=(n, n))
        eps = sp.csr_matrix((np.ones(reuses.size, dtype=bool), (reuses, target[reuses])), shape=(n, n))
        state = LinkState(g_mbs, g_vu, eps, users, contact)
        snr_free = radio.p_mbs_tx * g_mbs / radio.noise_power
        return (sinr_mbs_all(state, radio),
                sinr_vehicle_all(state, radio, mbs_interference=radio.d2d_mbs_interference),
                snr_free)

    # -- one slot ---------------------------------------------------------
    def step(self) -> SlotLedger:
        cfg = self.config
        rates, energy = cfg.rates, cfg.energy
        slot_s = energy.slot_seconds
        width = cfg.radio.bandwidth_hz * slot_s
        self._churn()

        pushed = self.catalog.fragment_size_bits * float(np.maximum(self.q - self.q_held, 0.0).sum())
        self.q_held = self.q.copy()
        cached_mass = float(self.popularity @ self.q)
        if cfg.control.policy == "none":
            xi = 0.0
        elif cfg.control.fixed_xi_eff is not None:
            xi = cfg.control.fixed_xi_eff
        else:
            xi = effective_meeting_rate(rates.xi, self.q, self.popularity, self.cp_realized)

        if self.n_users:
            g_m, g_v, g_free = self._links()
            stats = advance_chains(self.chains, rates.lam, rates.nu, xi, rates.omega, slot_s,
                                   self.rng["chain"])
            busy = stats.cellular_occupancy + stats.vehicle_occupancy
            share = np.divide(stats.vehicle_occupancy, busy, out=np.zeros(self.n_users), where=busy > 0)
            log_m, log_v, log_free = np.log2(1 + g_m), np.log2(1 + g_v), np.log2(1 + g_free)
            r_mbs = width * float(((1 - share) * log_m).sum())
            r_veh = width * float((share * log_v).sum())
            r_novc = width * float(log_free.sum())
            arrivals = int(stats.arrivals.sum())
            veh = int(stats.vehicle_served.sum())
            cell = int(stats.cellular_served.sum())
            backlog = float(stats.backlog_integral.sum())
            occ0 = float(stats.cellular_occupancy.sum())
            occ1 = float(stats.vehicle_occupancy.sum())
        else:
            occ0 = occ1 = 0.0
            log_m = log_v = np.zeros(0)
            r_mbs = r_veh = r_novc = backlog = 0.0
            arrivals = veh = cell = 0
            stats = None

        p_mbs = mbs_energy(r_mbs, energy)
        tx_power = cfg.radio.p_veh_tx if r_veh > 0 else 0.0
        backhaul_bits = r_veh if energy.backhaul_per_served_bit else pushed
        p_tx, p_cache, p_bh = vehicle_energy(r_veh, backhaul_bits, tx_power, energy)
        ledger_e = total_energy(p_mbs, p_tx, p_cache, p_bh)
        p_novc = mbs_energy(r_novc, energy)

        model_delay = expected_delay(xi, rates.lam, rates.nu, rates.omega)
        if cfg.control.delay_mode == "analytical" or stats is None:
            delays = np.full(self.n_users, model_delay)
        else:
            delays = stats.backlog_integral / (slot_s * rates.lam)
        excess = self.queues.update(delays)
        self.tracker = update_eta(self.tracker, ledger_e.p_total, r_mbs + r_veh)

        t = self.totals
        t["r"] += r_mbs + r_veh
        t["r_novc"] += r_novc
        t["p_novc"] += p_novc
        t["arrivals"] += arrivals
        t["veh"] += veh
        t["cell"] += cell
        t["backlog"] += backlog
        t["occ0"] += occ0
        t["occ1"] += occ1
        t["model_delay"] += model_delay
        t["cached_mass"] += cached_mass
        t["e2"] += 0.5 * float(excess @ excess)

        if veh:
            self._record_hits(veh)

        ledger = SlotLedger(
            self.slot, r_mbs, r_veh, r_novc, ledger_e.p_mbs, ledger_e.p_veh_tx, ledger_e.p_cache,
            ledger_e.p_backhaul, p_novc, arrivals, veh, cell, backlog, xi, cached_mass,
            float(self.q.sum()), float(delays.mean()) if delays.size else 0.0,
            self.queues.max_backlog, self.tracker.eta)
        if self.keep_traces:
            self.ledgers.append(ledger)

        self._decide(float(log_m.mean()) if log_m.size else 0.0,
                     float(log_v.mean()) if log_v.size else 0.0)
        self.slot += 1
        if self.slot % self.usage.window == 0:
            self.usage.close_window()
            self.usage.hold(self.q)
        return ledger

    def _record_hits(self, n_hits: int) -> None:
        if self.n_caching == 0:
            return
        weight = self.popularity * self.usage.copies
        support = np.flatnonzero(weight)
        if support.size == 0:
            return
        rng = self.rng["hits"]
        w = weight[support]
        frags = support[rng.choice(support.size, size=n_hits, p=w / w.sum())]
        self.usage.access(frags, rng.random(n_hits))

    # -- policy -----------------------------------------------------------
    def snapshot(self, mean_log_mbs: float, mean_log_veh: float) -> SlotSnapshot:
        return SlotSnapshot(
            rates=self.config.rates, cache_proportion=self.cp_realized, popularity=self.popularity,
            q_current=self.q, q_previous=self.q, mean_log_mbs=mean_log_mbs, mean_log_veh=mean_log_veh,
            n_users=self.n_users, bandwidth_hz=self.config.radio.bandwidth_hz,
            fragment_size_bits=self.catalog.fragment_size_bits, capacity_bits=self.capacity_bits)

    def _decide(self, mean_log_mbs: float, mean_log_veh: float) -> None:
        ctl = self.config.control
        if ctl.policy == "none" or self.n_users == 0:
            return
        snap = self.snapshot(mean_log_mbs, mean_log_veh)
        if ctl.policy == "online":
            problem = build_slot_problem(snap, self.config.energy, self.queues, self.tracker.eta, ctl.v_param)
            new_q = solve_slot(problem).q
        elif self.slot % ctl.offline_update_interval_slots == 0:
            new_q = offline_placement(snap, self.config)
        else:
            return
        if not np.array_equal(new_q, self.q):
            self.q = new_q
            self.usage.hold(self.q)

    # -- results ----------------------------------------------------------
    def run(self) -> "EpisodeMetrics":
        for _ in range(self.config.n_slots - self.slot):
            self.step()
        return self.metrics()

    def metrics(self) -> EpisodeMetrics:
        t = self.totals
        k = max(self.slot, 1)
        served = t["veh"] + t["cell"]
        d_av = self.queues.d_av
        gain = (t["r"] - t["r_novc"]) / t["r_novc"] if t["r_novc"] > 0 else 0.0
        b_est = t["e2"] / k
        r_star = t["r"] / k
        v = self.config.control.v_param
        bound = diagnostics_bound(b_est, v, r_star) if v > 0 and r_star > 0 else math.inf
        if self.usage.held and self.slot % self.usage.window:
            # partial trailing window: counts only if no full window fits in the episode
            if not self.usage.ratios:
                self.usage.close_window()
        traces = None
        if self.keep_traces:
            traces = {f.name: np.array([getattr(l, f.name) for l in self.ledgers])
                      for f in fields(SlotLedger)}
        return EpisodeMetrics(
            eta_ee=self.tracker.eta,
            hit_ratio=t["veh"] / served if served else 0.0,
            cache_utilization=self.usage.utilization,
            system_gain=gain,
            eta_novc=t["p_novc"] / t["r_novc"] if t["r_novc"] > 0 else 0.0,
            mean_delay=t["backlog"] / t["arrivals"] if t["arrivals"] else 0.0,
            mean_model_delay=t["model_delay"] / k,
            vehicle_share=t["occ1"] / (t["occ0"] + t["occ1"]) if t["occ0"] + t["occ1"] > 0 else 0.0,
            max_h=self.queues.max_backlog,
            h_over_k=self.queues.max_backlog / k / d_av,
            b_estimate=b_est,
            bound_gap=bound,
            requests=int(t["arrivals"]),
            vehicle_served=int(t["veh"]),
            cellular_served=int(t["cell"]),
            n_users=self.n_users,
            n_vehicles=self.fleet.count,
            n_caching=self.n_caching,
            mean_cached_mass=t["cached_mass"] / k,
            traces=traces,
        )


def offline_placement(snap: SlotSnapshot, config: ScenarioConfig) -> np.ndarray:
    """Energy-efficiency-optimal top-m placement under the popularity seen now.

    Candidates fill the ``m`` currently most popular fragments for every ``m``
    up to the capacity; the Dinkelbach iteration picks the one with the lowest
    expected energy per bit, with the cache push amortized over the update
    interval.
    """
    r, energy, radio = config.rates, config.energy, config.radio
    budget = int(np.floor(snap.capacity_bits / snap.fragment_size_bits + 1e-9))
    top = np.lexsort((np.arange(snap.popularity.size), -snap.popularity))[:budget]
    scale = radio.bandwidth_hz * energy.slot_seconds * snap.n_users
    interval = config.control.offline_update_interval_slots

    def expected(m):
        mass = float(snap.popularity[top[:m]].sum())
        k1 = kappa1_from_rates(r.xi * snap.cache_proportion * mass, r.lam, r.nu)
        r_m = scale * (1 - k1) * snap.mean_log_mbs
        r_v = scale * k1 * snap.mean_log_veh
        power = (energy.mbs_rate_energy * r_m + energy.cache_rate_energy * energy.slot_seconds * r_v
                 + (energy.amplifier_factor * radio.p_veh_tx * energy.slot_seconds if k1 > 0 else 0.0)
                 + energy.mbs_rate_energy * snap.fragment_size_bits * m / interval)
        return power, r_m + r_v

    table = {m: expected(m) for m in range(budget + 1)}
    if any(v[1] <= 0 for v in table.values()):
        return np.zeros_like(snap.popularity)
    res = dinkelbach_solve_static(lambda m: table[m][0], lambda m: table[m][1], list(table))
    q = np.zeros_like(snap.popularity)
    q[top[:res.q]] = 1.0
    return q


def run_slot(episode: Episode, policy: str | None = None, q_current=None) -> SlotLedger:
    """Advance ``episode`` by one slot, optionally forcing the cache vector first."""
    if policy is not None and policy != episode.config.control.policy:
        raise DomainError("policy differs from the episode's configured policy")
    if q_current is not None:
        q = np.asarray(q_current, dtype=float)
        if q.shape != episode.q.shape:
            raise DomainError("q_current has the wrong length")
        episode.q = q.copy()
        episode.usage.hold(episode.q)
    return episode.step()


def run_episode(config: ScenarioConfig, keep_traces: bool = False) -> EpisodeMetrics:
    return Episode(config, keep_traces=keep_traces).run()


@dataclass(frozen=True)
class SweepRow:
    config: ScenarioConfig
    metrics: EpisodeMetrics | None
    error: str | None = None


def _sweep_one(args) -> SweepRow:
    config, keep_traces = args
    try:
        return SweepRow(config, run_episode(config, keep_traces))
    except (VehCacheError, ValueError, FloatingPointError) as exc:
        return SweepRow(config, None, f"{type(exc).__name__}: {exc}")


def sweep(configs, threads: int = 1, keep_traces: bool = False) -> list[SweepRow]:
    """One row per config, in input order; failures are captured per row."""
    configs = list(configs)
    if not configs:
        raise DomainError("sweep needs at least one config")
    jobs = [(c, keep_traces) for c in configs]
    if threads <= 1 or len(jobs) == 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_sweep_one, jobs, chunksize=1))
