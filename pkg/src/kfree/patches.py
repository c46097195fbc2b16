"""
Patches of V, their exact frequencies, censuses and entropy estimates.

A rho-patch is stored as the occupied subset of the ball ``Lambda cap B_rho(0)``.
Inside this module subsets of the ball are bitmasks over the ball points in
canonical (lexicographic) order.

Closed-form frequencies come from inclusion-exclusion over the forbidden
set: writing ``g(S)`` for the density of translates putting all of ``S`` in V
(an Euler product over coset counts of ``S``), the frequency of the patch with
occupied set ``P`` is ``sum_{F subset Q} (-1)^|F| g(P + F)``.  For a whole
census this is a superset Moebius transform of ``g`` done once in
``N 2^N`` operations.

Frequencies are per lattice site (they sum to 1 over all patches); for a
lattice of determinant ``d`` the density of the locator set per unit volume is
the frequency divided by ``d``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product
from typing import Sequence

import mpmath
import numpy as np

from .kfree_sets import KFreeConfig, admissible, kfree_mask
from .lattice import (
    MAX_POINTS,
    Radius,
    ResourceCapError,
    as_radius,
    ball_volume,
    diameter_sq,
    enumerate_ball,
    scan_ball,
)
from .numtheory import WORKING_DPS, generalized_patch_product, primes_up_to, zeta

__all__ = [
    "CensusEntry",
    "CensusReport",
    "FrequencyValue",
    "Patch",
    "PatchCensus",
    "all_patch_frequencies",
    "ball_points",
    "census_checks",
    "entropy_measure_estimate",
    "entropy_patch_counting_estimate",
    "n_rho_exact",
    "patch_at",
    "patch_census",
    "patch_frequency_closed",
    "symmetry_classes",
]

#: inclusion-exclusion over the forbidden set is 2^|Q|
MAX_FORBIDDEN = 25
#: n_rho_exact works on balls up to this many points
MAX_BALL_COUNT = 30
#: full closed-form tables (2^N frequencies) up to this many ball points
MAX_BALL_TABLE = 20
#: fractional bits of the fixed-point patch table
_FIXED_BITS = 160

Point = tuple[int, ...]


@dataclass(frozen=True)
class FrequencyValue:
    value: float
    error_bound: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Patch:
    """A rho-patch: ``occupied`` is a sorted tuple of points of the ball."""

    rho: Radius
    occupied: tuple[Point, ...]
    ball: tuple[Point, ...] = field(repr=False)

    def __post_init__(self):
        if not set(self.occupied) <= set(self.ball):
            raise ValueError("occupied points must lie in the ball")

    @cached_property
    def forbidden(self) -> tuple[Point, ...]:
        occ = set(self.occupied)
        return tuple(p for p in self.ball if p not in occ)

    def __len__(self) -> int:
        return len(self.occupied)


def ball_points(config: KFreeConfig, rho) -> tuple[Point, ...]:
    """``Lambda cap B_rho(0)`` in canonical order."""
    return tuple(tuple(p) for p in enumerate_ball(config.lattice, None, rho).tolist())


def patch_at(config: KFreeConfig, t: Sequence[int], rho) -> Patch:
    """The rho-patch ``(V - t) cap B_rho(0)``."""
    r = as_radius(rho)
    ball = ball_points(config, r)
    arr = np.array(ball, dtype=object if _needs_object(t) else np.int64).reshape(len(ball), config.n)
    shifted = arr + np.array([int(v) for v in t], dtype=arr.dtype)
    if arr.dtype == object:
        from .kfree_sets import is_k_free

        mask = [is_k_free(config, row) for row in shifted.tolist()]
    else:
        mask = kfree_mask(config, shifted)
    return Patch(r, tuple(p for p, m in zip(ball, mask) if m), ball)


def _needs_object(t) -> bool:
    return any(abs(int(v)) > 2**40 for v in t)


# ---------------------------------------------------------------------------
# subset products g(S)


def _candidate_primes(config: KFreeConfig, points: Sequence[Point]) -> list[int]:
    """Primes at which some subset of ``points`` can have fewer cosets than points."""
    n_pts = len(points)
    d2 = diameter_sq(points, config.lattice)
    lam2 = config.lattice.lambda_sq
    out = []
    for p in primes_up_to(max(2, n_pts + 2, math.isqrt(int(math.ceil(d2 / lam2))) + 2)):
        # two points share a coset of p^k Lambda only if p^k lambda <= distance
        if p**config.nk <= n_pts or p ** (2 * config.k) * lam2 <= d2:
            out.append(p)
    return out


def _coset_class_masks(config: KFreeConfig, points: Sequence[Point], p: int) -> list[int]:
    """Bitmasks of ``points`` grouped by coset of ``p^k Lambda``."""
    m = p**config.k
    groups: dict[tuple, int] = {}
    for i, pt in enumerate(points):
        key = tuple(v % m for v in pt)
        groups[key] = groups.get(key, 0) | (1 << i)
    return list(groups.values())


def _popcount(masks: np.ndarray) -> np.ndarray:
    x = masks.astype(np.uint64)
    out = np.zeros(len(x), dtype=np.int64)
    while x.any():
        out += (x & np.uint64(1)).astype(np.int64)
        x >>= np.uint64(1)
    return out


def _subset_keys(config: KFreeConfig, points: Sequence[Point], masks: np.ndarray):
    """For each mask: the tuple (|S|, r_p for each candidate prime)."""
    primes = _candidate_primes(config, points)
    cols = [_popcount(masks)]
    for p in primes:
        cnt = np.zeros(len(masks), dtype=np.int64)
        for cm in _coset_class_masks(config, points, p):
            cnt += (masks & np.int64(cm)) != 0
        cols.append(cnt)
    return primes, np.stack(cols, axis=1)


def _key_product(config: KFreeConfig, primes: list[int], key: Sequence[int]):
    r = int(key[0])
    if r == 0:
        return mpmath.mpf(1), 0.0
    exc = {p: int(rp) for p, rp in zip(primes, key[1:])}
    val = generalized_patch_product(exc, r, config.nk)
    return val.mp_value, val.tail_bound


def patch_frequency_closed(config: KFreeConfig, P, Q) -> FrequencyValue:
    """Frequency of translates with ``P`` inside V and ``Q`` outside V."""
    P = [tuple(int(v) for v in p) for p in P]
    Q = [tuple(int(v) for v in q) for q in Q]
    if set(P) & set(Q):
        raise ValueError("P and Q must be disjoint")
    if len(Q) > MAX_FORBIDDEN:
        raise ResourceCapError("inclusion-exclusion over forbidden set", 2 ** len(Q), 2**MAX_FORBIDDEN)
    if not admissible(config, P):
        return FrequencyValue(0.0, 0.0)
    points = P + Q
    base = (1 << len(P)) - 1
    fmasks = np.arange(1 << len(Q), dtype=np.int64)
    masks = base | (fmasks << len(P))
    signs = np.where(_popcount(fmasks) % 2, -1, 1)
    primes, keys = _subset_keys(config, points, masks)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    coef = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(coef, inverse.ravel(), signs)
    with mpmath.workdps(WORKING_DPS):
        total = mpmath.mpf(0)
        err = 0.0
        for key, c in zip(uniq.tolist(), coef.tolist()):
            if c == 0:
                continue
            v, b = _key_product(config, primes, key)
            total += c * v
            err += abs(c) * b
    value = min(max(float(total), 0.0), 1.0)
    return FrequencyValue(value, err + 1e-30)


def all_patch_frequencies(config: KFreeConfig, points: Sequence[Point]) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form frequency of every subset of ``points`` as the occupied set
    (complement forbidden).  Returns float arrays ``(nu, err)`` indexed by bitmask.

    The transform runs on ``g`` rounded to fixed point with ``_FIXED_BITS``
    fractional bits, so it is exact; the error is the accumulated Euler tail
    bounds plus the final rounding to float.
    """
    N = len(points)
    if N > MAX_BALL_TABLE:
        raise ResourceCapError("closed-form patch table", 2**N, 2**MAX_BALL_TABLE)
    masks = np.arange(1 << N, dtype=np.int64)
    primes, keys = _subset_keys(config, points, masks)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    scale = mpmath.mpf(2) ** _FIXED_BITS
    vals = np.empty(len(uniq), dtype=object)
    bnds = np.empty(len(uniq), dtype=float)
    with mpmath.workdps(WORKING_DPS + 20):
        for i, key in enumerate(uniq.tolist()):
            v, b = _key_product(config, primes, key)
            vals[i] = int(mpmath.nint(v * scale))
            bnds[i] = b
    g = vals[inverse.ravel()]
    err = bnds[inverse.ravel()].copy()
    # superset Moebius transform: nu[S] = sum_{T >= S} (-1)^{|T - S|} g[T]
    for i in range(N):
        view = g.reshape(-1, 2, 1 << i)
        view[:, 0, :] -= view[:, 1, :]
        ev = err.reshape(-1, 2, 1 << i)
        ev[:, 0, :] += ev[:, 1, :]
    denom = 1 << _FIXED_BITS
    nu = np.array([x / denom for x in g.tolist()], dtype=float)
    # fixed-point rounding (2^N terms of half an ulp) and the float conversion
    err += (1 << N) * 2.0 ** -_FIXED_BITS + np.abs(nu) * 2.0**-52
    return nu, err


# ---------------------------------------------------------------------------
# exact patch counts


def _count_admissible_subsets(config: KFreeConfig, points: Sequence[Point]) -> int:
    """Number of subsets of ``points`` missing a coset of ``p^k Lambda`` for all p.

    Inclusion-exclusion over the set T of primes whose cosets are all hit;
    the joint covering count for T is a signed sum over the classes avoided at
    all but the largest prime of T.
    """
    N = len(points)
    full = (1 << N) - 1
    classes = {}
    for p in primes_up_to(N):
        if p**config.nk > N:
            break
        cms = _coset_class_masks(config, points, p)
        if len(cms) == p**config.nk:
            classes[p] = cms
    total = 0
    primes = list(classes)
    for size in range(len(primes) + 1):
        for T in combinations(primes, size):
            if not T:
                total += 1 << N
                continue
            last = max(T, key=lambda p: len(classes[p]))
            others = [classes[p] for p in T if p != last]
            cover = 0
            for picks in product(*[range(1 << len(cm)) for cm in others]):
                banned, sign = 0, 1
                for cm, pick in zip(others, picks):
                    for j, c in enumerate(cm):
                        if pick >> j & 1:
                            banned |= c
                            sign = -sign
                allowed = full & ~banned
                term = 1
                for c in classes[last]:
                    term *= (1 << (c & allowed).bit_count()) - 1
                    if not term:
                        break
                cover += sign * term
            total += (-1) ** size * cover
    return total


def n_rho_exact(config: KFreeConfig, rho) -> int:
    """N(rho): the number of distinct rho-patches of V (= admissible subsets of the ball)."""
    points = ball_points(config, rho)
    if len(points) > MAX_BALL_COUNT:
        raise ResourceCapError("patch count (ball points)", len(points), MAX_BALL_COUNT)
    return _count_admissible_subsets(config, points)


# ---------------------------------------------------------------------------
# census


@dataclass(frozen=True)
class CensusEntry:
    occupied: tuple[Point, ...]
    closed: FrequencyValue
    count: int
    empirical: float

    @property
    def size(self) -> int:
        return len(self.occupied)

    @property
    def observed(self) -> bool:
        return self.count > 0


@dataclass
class PatchCensus:
    config: KFreeConfig
    rho: Radius
    R: Radius
    ball: tuple[Point, ...]
    entries: list[CensusEntry]
    n_rho: int
    sites: int

    @property
    def unobserved(self) -> list[CensusEntry]:
        return [e for e in self.entries if not e.observed]


def _scan_patch_codes(config: KFreeConfig, ball: Sequence[Point], R, threads: int, max_points: float) -> Counter:
    offs = [np.array(b, dtype=np.int64) for b in ball]

    def codes(t):
        code = np.zeros(len(t), dtype=np.int64)
        for j, off in enumerate(offs):
            code |= kfree_mask(config, t + off).astype(np.int64) << j
        u, c = np.unique(code, return_counts=True)
        return dict(zip(u.tolist(), c.tolist()))

    total = Counter()
    for part in scan_ball(config.lattice, None, R, codes, threads=threads, max_points=max_points):
        total.update(part)
    return total


def _mask_points(ball, mask: int) -> tuple[Point, ...]:
    return tuple(p for j, p in enumerate(ball) if mask >> j & 1)


def patch_census(config: KFreeConfig, rho, R, *, threads: int = 1, max_points: float = MAX_POINTS) -> PatchCensus:
    """Bin the rho-patches at every ``t`` in ``B_R(0)`` and attach closed forms.

    Admissible patches never seen in the window stay in the table with count 0.
    """
    r, big = as_radius(rho), as_radius(R)
    if not big.sq > r.sq:
        raise ValueError("R must exceed rho")
    ball = ball_points(config, r)
    nu, err = all_patch_frequencies(config, ball)
    counts = _scan_patch_codes(config, ball, big, threads, max_points)
    vol = ball_volume(config.n, big) / config.lattice.det
    masks = set(counts)
    masks.update(m for m in range(1 << len(ball)) if nu[m] > 0 and admissible(config, _mask_points(ball, m)))
    entries = []
    for m in masks:
        occ = _mask_points(ball, m)
        closed = FrequencyValue(float(min(max(nu[m], 0), 1)), float(err[m]))
        if not admissible(config, occ):
            closed = FrequencyValue(0.0, 0.0)
        entries.append(CensusEntry(occ, closed, counts.get(m, 0), counts.get(m, 0) / vol))
    entries.sort(key=lambda e: (-e.size, e.occupied))
    n_rho = sum(1 for e in entries if e.closed.value > 0)
    return PatchCensus(config, r, big, ball, entries, n_rho, sum(counts.values()))


@dataclass(frozen=True)
class CensusReport:
    total: float
    total_residual: float
    mean_size: float
    mean_size_target: float
    mean_size_residual: float
    tolerance: float
    empirical_max_deviation: float

    @property
    def passed(self) -> bool:
        return self.total_residual <= self.tolerance and self.mean_size_residual <= self.tolerance * len(self.__dict__)


def census_checks(census: PatchCensus) -> CensusReport:
    """Check ``sum nu = 1`` and ``sum nu |P| = |ball| / zeta(nk)``."""
    with mpmath.workdps(WORKING_DPS):
        tot = mpmath.fsum(mpmath.mpf(e.closed.value) for e in census.entries)
        mean = mpmath.fsum(mpmath.mpf(e.closed.value) * e.size for e in census.entries)
    target = len(census.ball) / zeta(census.config.nk)
    # float rounding of each entry plus the accumulated tail bounds
    tol = sum(e.closed.error_bound for e in census.entries) + 4e-16 * len(census.entries)
    dev = max((abs(e.empirical - e.closed.value) for e in census.entries), default=0.0)
    return CensusReport(
        float(tot), abs(float(tot) - 1.0), float(mean), target, abs(float(mean) - target), tol, dev
    )


def symmetry_classes(census: PatchCensus) -> list[tuple[CensusEntry, int]]:
    """Group census entries into orbits of the lattice's point group.

    Returns ``(representative, orbit size)`` pairs; a reporting aid only.
    """
    group = census.config.lattice.point_group
    by_occ = {e.occupied: e for e in census.entries}
    seen = set()
    out = []
    for e in census.entries:
        if e.occupied in seen:
            continue
        orbit = set()
        for u in group:
            img = tuple(sorted(tuple(int(v) for v in u @ np.array(p)) for p in e.occupied))
            orbit.add(img)
        seen |= orbit
        out.append((by_occ[min(orbit & by_occ.keys())], len(orbit)))
    return out


# ---------------------------------------------------------------------------
# entropy estimates


def entropy_patch_counting_estimate(config: KFreeConfig, rho) -> float:
    """``log2 N(rho) / (rho^n v_n)``; tends to ``1 / (zeta(nk) det)`` as rho grows."""
    return math.log2(n_rho_exact(config, rho)) / ball_volume(config.n, rho)


def entropy_measure_estimate(config: KFreeConfig, rho) -> float:
    """``sum -nu log2 nu / (rho^n v_n)`` over all patches (``0 log 0 = 0``); tends to 0."""
    nu, _ = all_patch_frequencies(config, ball_points(config, rho))
    pos = nu[nu > 0]
    h = float(-(pos * np.log2(pos)).sum())
    return h / ball_volume(config.n, rho)
