"""Per-slot energy accounting: MBS transmission, vehicle transmission, caching, backhaul.

Every ledger entry is an energy in joules over one slot.  Power-rated
coefficients are multiplied by the slot length.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError

__all__ = ["EnergyParams", "EnergyLedger", "mbs_energy", "vehicle_energy", "total_energy"]


@dataclass(frozen=True)
class EnergyParams:
    mbs_rate_energy: float = 0.5e-8     # J/bit
    cache_rate_energy: float = 6.25e-12  # W/bit
    amplifier_factor: float = 15.13
    slot_seconds: float = 1.0
    # charge backhaul on every vehicle-served bit instead of on cache updates
    backhaul_per_served_bit: bool = False

    def __post_init__(self):
        for name in ("mbs_rate_energy", "cache_rate_energy", "amplifier_factor", "slot_seconds"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


@dataclass(frozen=True)
class EnergyLedger:
    p_mbs: float = 0.0
    p_veh_tx: float = 0.0
    p_cache: float = 0.0
    p_backhaul: float = 0.0

    @property
    def p_total(self) -> float:
        return self.p_mbs + self.p_veh_tx + self.p_cache + self.p_backhaul

    def __add__(self, other: "EnergyLedger") -> "EnergyLedger":
        return EnergyLedger(self.p_mbs + other.p_mbs, self.p_veh_tx + other.p_veh_tx,
                            self.p_cache + other.p_cache, self.p_backhaul + other.p_backhaul)


def _nonneg(**values):
    for name, v in values.items():
        if v < 0:
            raise DomainError(f"{name} must be nonnegative, got {v}")


def mbs_energy(r_mbs: float, params: EnergyParams) -> float:
    """Linear transmission energy of the MBS for ``r_mbs`` delivered bits."""
    _nonneg(r_mbs=r_mbs)
    return r_mbs * params.mbs_rate_energy


def vehicle_energy(r_veh: float, backhauled_bits: float, tx_power_w: float,
                   params: EnergyParams) -> tuple[float, float, float]:
    """Vehicle-side energies ``(p_tx, p_cache, p_backhaul)`` for one slot.

    ``p_tx`` is the amplifier-scaled radiated energy, ``p_cache`` is the
    storage energy of the served bits and ``p_backhaul`` prices the bits pushed
    into vehicle caches at the MBS per-bit rate.
    """
    _nonneg(r_veh=r_veh, backhauled_bits=backhauled_bits, tx_power_w=tx_power_w)
    p_tx = params.amplifier_factor * tx_power_w * params.slot_seconds
    p_cache = r_veh * params.cache_rate_energy * params.slot_seconds
    p_backhaul = backhauled_bits * params.mbs_rate_energy
    return p_tx, p_cache, p_backhaul


def total_energy(p_mbs: float, p_veh_tx: float, p_cache: float, p_backhaul: float) -> EnergyLedger:
    _nonneg(p_mbs=p_mbs, p_veh_tx=p_veh_tx, p_cache=p_cache, p_backhaul=p_backhaul)
    return EnergyLedger(float(p_mbs), float(p_veh_tx), float(p_cache), float(p_backhaul))
