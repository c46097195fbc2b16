"""
The k-free points V(Lambda, k) and the sets built around them.

A lattice point ``l`` lies in ``c^k Lambda`` exactly when ``c^k`` divides
every basis coordinate, so the k-content is read off the gcd ``g`` of the
coordinates: ``c_k(l) = prod p^floor(e_p/k)`` for ``g = prod p^e_p``.  The
origin has content ``INFINITE``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .lattice import (
    MAX_POINTS,
    Lattice,
    ball_volume,
    coset_count,
    crt_combine,
    enumerate_ball,
    scan_ball,
)
from .numtheory import factorize, is_kfree_int, primes_up_to

__all__ = [
    "INFINITE",
    "KFreeConfig",
    "admissible",
    "density_empirical",
    "find_hole",
    "is_k_free",
    "k_content",
    "kfree_mask",
    "kfree_points_in_ball",
    "locator_count_empirical",
    "main_term_vp_count",
    "vp_locator_count",
    "vp_member",
]

INFINITE = math.inf
#: largest |coordinate gcd| served from the sieved lookup table
_TABLE_LIMIT = 1 << 26


@dataclass(frozen=True)
class KFreeConfig:
    lattice: Lattice
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.lattice.n == 1 and self.k == 1:
            raise ValueError("n = k = 1 is the trivial case and is excluded")

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def nk(self) -> int:
        return self.lattice.n * self.k


def _gcd_point(point: Sequence[int]) -> int:
    return math.gcd(*(int(v) for v in point))


def k_content(config: KFreeConfig, point: Sequence[int]) -> int | float:
    """Largest ``c`` with ``point`` in ``c^k Lambda``; ``INFINITE`` for the origin."""
    g = _gcd_point(point)
    if g == 0:
        return INFINITE
    return math.prod(p ** (e // config.k) for p, e in factorize(g))


def is_k_free(config: KFreeConfig, point: Sequence[int]) -> bool:
    g = _gcd_point(point)
    return g != 0 and is_kfree_int(g, config.k)


def vp_member(config: KFreeConfig, point: Sequence[int], P: int) -> bool:
    """Membership in V_P: nonzero with k-content coprime to ``P``."""
    if P < 1:
        raise ValueError("P must be positive")
    g = _gcd_point(point)
    if g == 0:
        return False
    # gcd(c_k, P) = 1  <=>  no prime p | P has p^k | g
    return all(g % p**config.k for p, _ in factorize(P))


@lru_cache(maxsize=16)
def _kfree_table(k: int, size: int) -> np.ndarray:
    table = np.ones(size + 1, dtype=bool)
    table[0] = False
    for p in primes_up_to(math.isqrt(size) if k >= 2 else size):
        pk = p**k
        if pk > size:
            break
        table[::pk] = False
    table.flags.writeable = False
    return table


def kfree_mask(config: KFreeConfig, coords: np.ndarray) -> np.ndarray:
    """Vectorised :func:`is_k_free` over the rows of an (m, n) integer array."""
    coords = np.asarray(coords)
    if coords.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    g = np.gcd.reduce(np.abs(coords), axis=1)
    if config.k == 1:
        return g == 1
    top = int(g.max())
    if top <= _TABLE_LIMIT:
        size = 1 << max(16, top.bit_length())
        return _kfree_table(config.k, size)[g]
    return np.array([is_kfree_int(int(v), config.k) for v in g], dtype=bool)


def kfree_points_in_ball(config: KFreeConfig, center, rho, *, max_points: float = MAX_POINTS) -> np.ndarray:
    """The k-free points of the open ball, as a sorted (m, n) array."""
    pts = enumerate_ball(config.lattice, center, rho, max_points=max_points)
    return pts[kfree_mask(config, pts)]


def density_empirical(config: KFreeConfig, R, *, threads: int = 1, max_points: float = MAX_POINTS) -> float:
    """``|V cap B_R(0)| / (R^n v_n)``, tending to ``1 / (zeta(nk) det Lambda)``."""
    counts = scan_ball(
        config.lattice, None, R, lambda a: int(kfree_mask(config, a).sum()), threads=threads, max_points=max_points
    )
    return sum(counts) / ball_volume(config.n, R)


def _relevant_primes(config: KFreeConfig, size: int) -> list[int]:
    # coset_count(F, p^k) <= |F| < p^nk for larger p, so only p^nk <= |F| can fail
    return [p for p in primes_up_to(max(2, int(size ** (1.0 / config.nk)) + 1)) if p**config.nk <= size]


def admissible(config: KFreeConfig, points: Iterable[Sequence[int]]) -> bool:
    """Does the finite set miss some coset of ``p^k Lambda`` for every prime ``p``?"""
    pts = {tuple(int(v) for v in p) for p in points}
    return all(coset_count(pts, p**config.k) < p**config.nk for p in _relevant_primes(config, len(pts)))


def _shifted_masks(config, t: np.ndarray, offsets, want: bool) -> np.ndarray:
    ok = np.ones(len(t), dtype=bool)
    for off in offsets:
        m = kfree_mask(config, t + np.asarray(off, dtype=np.int64))
        ok &= m if want else ~m
    return ok


def locator_count_empirical(
    config: KFreeConfig, P, Q, R, *, threads: int = 1, max_points: float = MAX_POINTS
) -> int:
    """Number of ``t`` in ``B_R(0)`` with ``P + t`` inside V and ``Q + t`` outside V."""
    P = [tuple(p) for p in P]
    Q = [tuple(q) for q in Q]
    if set(P) & set(Q):
        raise ValueError("P and Q must be disjoint")

    def count(t):
        return int((_shifted_masks(config, t, P, True) & _shifted_masks(config, t, Q, False)).sum())

    return sum(scan_ball(config.lattice, None, R, count, threads=threads, max_points=max_points))


def main_term_vp_count(config: KFreeConfig, P, m: int, Pprod: int, R) -> float:
    """Predicted size of ``L(V_Pprod; P, {}) cap (a + m Lambda) cap B_R``.

    ``R^n v_n / (m^n det) * prod_{p | Pprod} (1 - |P / p^k Lambda| / p^nk)``.
    """
    if math.gcd(m, Pprod) != 1:
        raise ValueError("m and Pprod must be coprime")
    P = [tuple(p) for p in P]
    val = ball_volume(config.n, R) / (m**config.n * config.lattice.det)
    for p, _ in factorize(Pprod):
        val *= 1 - coset_count(P, p**config.k) / p**config.nk
    return val


def vp_locator_count(config: KFreeConfig, P, Pprod: int, R, m: int = 1, residue=None) -> int:
    """Exact ``|L(V_Pprod; P, {}) cap (residue + m Lambda) cap B_R(0)|``."""
    P = [np.asarray(p, dtype=np.int64) for p in P]
    primes = [p for p, _ in factorize(Pprod)]
    res = np.zeros(config.n, dtype=np.int64) if residue is None else np.asarray(residue, dtype=np.int64)

    def count(t):
        ok = ((t - res) % m == 0).all(axis=1)
        for off in P:
            x = t + off
            nonzero = (x != 0).any(axis=1)
            ok &= nonzero
            for p in primes:
                ok &= ~((x % p**config.k) == 0).all(axis=1)
        return int(ok.sum())

    return sum(scan_ball(config.lattice, None, R, count))


def find_hole(config: KFreeConfig, C: Iterable[Sequence[int]]) -> tuple[tuple[int, ...], int]:
    """A residue class ``a + M Lambda`` all of whose translates of ``C`` avoid V.

    With ``m_i`` the first ``s = |C|`` primes, ``a = -c_i (mod m_i^k Lambda)``
    for each ``c_i``, and ``M = (m_1 ... m_s)^k``.  The returned ``a`` is
    checked exactly before returning.
    """
    pts = sorted({tuple(int(v) for v in c) for c in C})
    if not pts:
        raise ValueError("C must be non-empty")
    s = len(pts)
    bound = 16
    while len(primes_up_to(bound)) < s:
        bound *= 2
    moduli = [p**config.k for p in primes_up_to(bound)[:s]]
    a, M = crt_combine([(tuple(-v for v in c), m) for c, m in zip(pts, moduli)])
    for c, mk in zip(pts, moduli):
        x = [ci + ai for ci, ai in zip(c, a)]
        # certificate: every coordinate of c + a divisible by m_i^k
        if any(v % mk for v in x) or is_k_free(config, x):
            raise AssertionError(f"hole construction failed at {c}")
    return a, M
