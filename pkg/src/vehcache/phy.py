"""Radio-layer computations: path loss, SINR of MBS and D2D links, Shannon rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .catalog import Catalog
from .errors import DimensionMismatch, DomainError, OutOfRange
from .interaction import ServiceSplit, served_count_pmf

__all__ = [
    "RadioParams",
    "LinkState",
    "dbm_to_watt",
    "channel_gain",
    "sinr_mbs_user",
    "sinr_vehicle_user",
    "sinr_mbs_all",
    "sinr_vehicle_all",
    "in_range",
    "shannon_rate",
    "slot_throughput",
    "SlotThroughput",
]

MIN_DISTANCE_M = 1.0


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RadioParams:
    p_mbs_tx: float = dbm_to_watt(46.0)
    p_veh_tx: float = dbm_to_watt(23.0)
    noise_power: float = dbm_to_watt(-110.0)
    bandwidth_hz: float = 10e6
    pathloss_exponent: float = 3.0
    reference_gain: float = 10 ** -3.8
    d2d_range_m: float = 20.0
    cell_radius_m: float = 350.0
    # whether the simulator charges the MBS downlink as interference on D2D
    # links; off models ideal interference management
    d2d_mbs_interference: bool = False
    # probability that an active caching vehicle reuses some user's downlink
    reuse_probability: float = 0.1

    def __post_init__(self):
        for name in ("p_mbs_tx", "p_veh_tx", "noise_power", "bandwidth_hz", "reference_gain",
                     "d2d_range_m", "cell_radius_m"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.pathloss_exponent < 2:
            raise DomainError("pathloss_exponent must be at least 2")
        if not 0.0 <= self.reuse_probability <= 1.0:
            raise DomainError("reuse_probability must lie in [0, 1]")


@dataclass
class LinkState:
    """Channel snapshot for one slot.

    ``gain_veh_to_user[v, k]`` is the gain from vehicle ``v`` to user ``k`` and
    ``reuse_indicator[n, k]`` marks vehicle ``n`` reusing the downlink of user
    ``k``.  Both may be scipy sparse matrices when only a few pairs matter; the
    population-wide helpers assume vehicle ``v`` is the contact of user ``v``.
    """

    gain_mbs_to_user: np.ndarray
    gain_veh_to_user: np.ndarray
    reuse_indicator: np.ndarray
    user_positions: np.ndarray | None = None
    vehicle_positions: np.ndarray | None = None

    def __post_init__(self):
        n = self.gain_mbs_to_user.shape[0]
        if self.gain_veh_to_user.shape[1] != n or self.reuse_indicator.shape != self.gain_veh_to_user.shape:
            raise DimensionMismatch("link state arrays disagree on the number of users")
        g = self.gain_veh_to_user
        g_min = g.min() if g.shape[0] * g.shape[1] else 0.0
        if np.any(self.gain_mbs_to_user < 0) or g_min < 0:
            raise DomainError("channel gains must be nonnegative")
        if np.any(np.asarray(self.reuse_indicator.sum(axis=1)) > 1):
            raise DomainError("a vehicle may reuse at most one downlink channel")


def channel_gain(distance_m, params: RadioParams):
    """Large-scale gain ``ref * d**-alpha`` with distances clamped to at least 1 m."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be positive")
    g = params.reference_gain * np.maximum(d, MIN_DISTANCE_M) ** -params.pathloss_exponent
    return float(g) if g.ndim == 0 else g


def _reuse_interference(state: LinkState, params: RadioParams) -> np.ndarray:
    # interference at user k from every vehicle reusing k's downlink
    eps, g = state.reuse_indicator, state.gain_veh_to_user
    if sp.issparse(eps):
        total = eps.multiply(g).sum(axis=0)
    else:
        total = (eps * g).sum(axis=0)
    return params.p_veh_tx * np.asarray(total, dtype=float).ravel()


def sinr_mbs_all(state: LinkState, params: RadioParams) -> np.ndarray:
    signal = params.p_mbs_tx * state.gain_mbs_to_user
    return signal / (params.noise_power + _reuse_interference(state, params))


def sinr_vehicle_all(state: LinkState, params: RadioParams,
                     mbs_interference: bool = True) -> np.ndarray:
    """D2D SINR of every user served by its own contact vehicle."""
    g_own = state.gain_veh_to_user.diagonal()
    signal = params.p_veh_tx * g_own
    other = _reuse_interference(state, params)
    own = params.p_veh_tx * state.reuse_indicator.diagonal() * g_own
    denom = params.noise_power + (other - own)
    if mbs_interference:
        denom = denom + params.p_mbs_tx * state.gain_mbs_to_user
    return signal / denom


def sinr_mbs_user(k: int, state: LinkState, params: RadioParams) -> float:
    signal = params.p_mbs_tx * state.gain_mbs_to_user[k]
    interference = params.p_veh_tx * float(state.reuse_indicator[:, k] @ state.gain_veh_to_user[:, k])
    return float(signal / (params.noise_power + interference))


def in_range(pos_a, pos_b, radius: float) -> bool:
    """Unit-disk connectivity; the boundary counts as connected."""
    a = np.asarray(pos_a, dtype=float)
    b = np.asarray(pos_b, dtype=float)
    return bool(np.hypot(*(a - b)) <= radius)


def sinr_vehicle_user(k: int, v: int, state: LinkState, params: RadioParams,
                      mbs_interference: bool = True) -> float:
    if state.user_positions is not None and state.vehicle_positions is not None:
        if not in_range(state.user_positions[k], state.vehicle_positions[v], params.d2d_range_m):
            raise OutOfRange(f"vehicle {v} is beyond {params.d2d_range_m} m of user {k}")
    signal = params.p_veh_tx * state.gain_veh_to_user[v, k]
    others = np.ones(state.reuse_indicator.shape[0], dtype=bool)
    others[v] = False
    interference = params.p_veh_tx * float(
        (state.reuse_indicator[others, k] * state.gain_veh_to_user[others, k]).sum())
    denom = params.noise_power + interference
    if mbs_interference:
        denom += params.p_mbs_tx * state.gain_mbs_to_user[k]
    return float(signal / denom)


def shannon_rate(bandwidth_hz: float, sinr):
    """``W * log2(1 + sinr)`` in bits per second."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise DomainError("sinr must be nonnegative")
    r = bandwidth_hz * np.log2(1.0 + s)
    return float(r) if r.ndim == 0 else r


@dataclass(frozen=True)
class SlotThroughput:
    r_mbs: float
    r_veh: float

    @property
    def r_total(self) -> float:
        return self.r_mbs + self.r_veh


def slot_throughput(q, catalog: Catalog, split: ServiceSplit, n_users: int, sinrs,
                    bandwidth_hz: float, slot_seconds: float = 1.0,
                    popularity=None) -> SlotThroughput:
    """Expected slot throughput with binomial service counts.

    ``R_m = W sum_k k P_m(k) sum_j (1-q_j) p_j log2(1+g^m_k)`` and
    ``R_v = W sum_k k P_v(k) sum_j q_j p_j log2(1+g^v_k)``, scaled to bits over
    the slot.  ``sinrs`` has shape ``(n_users, 2)`` holding ``(g^m_k, g^v_k)``
    for users ``k = 1..n_users``.
    """
    q = np.asarray(q, dtype=float)
    p = catalog.popularity if popularity is None else np.asarray(popularity, dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f"q has length {q.size}, popularity has {p.size}")
    sinrs = np.asarray(sinrs, dtype=float).reshape(-1, 2)
    if sinrs.shape[0] != n_users:
        raise DimensionMismatch(f"expected {n_users} SINR pairs, got {sinrs.shape[0]}")
    cached_mass = float(q @ p)
    k = np.arange(1, n_users + 1)
    pm = np.array([served_count_pmf(n_users, split.kappa0, int(i)) for i in k])
    pv = np.array([served_count_pmf(n_users, split.kappa1, int(i)) for i in k])
    log_m = np.log2(1.0 + sinrs[:, 0])
    log_v = np.log2(1.0 + sinrs[:, 1])
    scale = bandwidth_hz * slot_seconds
    r_m = scale * float(np.sum(k * pm * log_m)) * (1.0 - cached_mass)
    r_v = scale * float(np.sum(k * pv * log_v)) * cached_mass
    return SlotThroughput(r_m, r_v)
