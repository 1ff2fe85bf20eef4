"""Fragment catalog, Zipf popularity and cache-vector bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DomainError

__all__ = [
    "Catalog",
    "CacheVector",
    "CacheValidation",
    "zipf_popularity",
    "validate_cache_vector",
    "project_cache_vector",
]


def zipf_popularity(n_fragments: int, phi: float) -> np.ndarray:
    """Request probabilities ``p_j = j**-phi / sum_k k**-phi`` for ranks ``1..n``."""
    if n_fragments < 1:
        raise DomainError("n_fragments must be at least 1")
    if phi < 0:
        raise DomainError(f"zipf exponent {phi} must be nonnegative")
    weights = np.arange(1, n_fragments + 1, dtype=float) ** -phi
    return weights / weights.sum()


@dataclass(frozen=True)
class Catalog:
    n_fragments: int
    fragment_size_bits: float
    zipf_exponent: float
    popularity: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def zipf(cls, n_fragments: int, fragment_size_bits: float, zipf_exponent: float) -> "Catalog":
        if fragment_size_bits <= 0:
            raise DomainError("fragment_size_bits must be positive")
        p = zipf_popularity(n_fragments, zipf_exponent)
        p.flags.writeable = False
        return cls(n_fragments, float(fragment_size_bits), float(zipf_exponent), p)

    @property
    def total_bits(self) -> float:
        return self.n_fragments * self.fragment_size_bits


@dataclass(frozen=True)
class CacheVector:
    q: np.ndarray
    capacity_bits: float

    @classmethod
    def zeros(cls, n_fragments: int, capacity_bits: float) -> "CacheVector":
        return cls(np.zeros(n_fragments), float(capacity_bits))

    def used_bits(self, fragment_size_bits: float) -> float:
        return float(self.q.sum() * fragment_size_bits)


@dataclass(frozen=True)
class CacheValidation:
    ok: bool
    constraint: str | None = None  # "C2" (capacity) or "C3" (box)
    index: int | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate_cache_vector(cache: CacheVector, catalog: Catalog, atol: float = 1e-9) -> CacheValidation:
    """Check the box constraint C3 first (reporting the first bad index), then capacity C2."""
    q = np.asarray(cache.q, dtype=float)
    if q.shape != (catalog.n_fragments,):
        raise DimensionMismatch(f"q has length {q.size}, catalog has {catalog.n_fragments}")
    bad = np.flatnonzero((q < -atol) | (q > 1 + atol) | ~np.isfinite(q))
    if bad.size:
        i = int(bad[0])
        return CacheValidation(False, "C3", i, f"q[{i}]={q[i]} outside [0, 1]")
    used = q.sum() * catalog.fragment_size_bits
    if used > cache.capacity_bits * (1 + atol) + atol:
        return CacheValidation(False, "C2", None,
                               f"cached {used:.6g} bits exceeds capacity {cache.capacity_bits:.6g}")
    return CacheValidation(True)


def project_cache_vector(q, fragment_size_bits: float, capacity_bits: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= q <= 1, sum q * B <= S}``.

    Bisection on the multiplier of the capacity constraint.
    """
    q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
    budget = capacity_bits / fragment_size_bits
    if budget <= 0:
        return np.zeros_like(q)
    if q.sum() <= budget:
        return q
    lo, hi = 0.0, float(q.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(q - mid, 0.0, 1.0).sum() > budget:
            lo = mid
        else:
            hi = mid
    return np.clip(q - hi, 0.0, 1.0)
