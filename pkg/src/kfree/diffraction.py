"""
Autocorrelation and diffraction of V.

Closed forms:

* weight of ``a`` in the autocorrelation: ``xi(nk) prod_{p | c_k(a)} (1 + 1/(p^nk - 2))``,
  and ``1/zeta(nk)`` at ``a = 0``;
* intensity at a point of ``Q Lambda*`` with denominator ``q``:
  ``zeta(nk)^-2 prod_{p | q} (p^nk - 1)^-2`` when ``q`` is (k+1)-free, else 0.

Both are per unit volume: weights carry a factor ``1/det`` and intensities
``1/det^2``.  The intensity is also the sum of the Dirac-comb coefficients
``xi(nk) prod_{p | d} 1/(p^2nk - 2 p^nk)`` over squarefree ``d`` with
``q | d^k``; :func:`peak_list` uses that as a consistency check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, reduce
from typing import Sequence

import numpy as np

from .kfree_sets import KFreeConfig, is_k_free, k_content, kfree_mask
from .lattice import (
    MAX_POINTS,
    Lattice,
    Radius,
    as_radius,
    ball_volume,
    enumerate_ball,
    in_ball_mask,
    scan_ball,
)
from .numtheory import factorize, is_kfree_int, moebius, xi, zeta

__all__ = [
    "DiffractionPeak",
    "DifferenceReport",
    "DualPoint",
    "SERIES_DMAX",
    "autocorr_weight_closed",
    "autocorr_weight_empirical",
    "denominator",
    "difference_set_check",
    "diffraction_intensity",
    "dual_basis",
    "peak_list",
    "series_intensity",
]

#: squarefree d up to this bound enter the series check
SERIES_DMAX = 100


def _fraction_inverse(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    a = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [row[n:] for row in a]


def dual_basis(lattice: Lattice) -> Lattice:
    """The dual lattice, basis = inverse transpose; its Gram matrix is ``G^-1``."""
    basis = np.linalg.inv(lattice.basis).T
    gram = None
    if lattice.exact:
        gram = _fraction_inverse([list(r) for r in lattice.gram_exact])
    return Lattice.from_basis(basis.tolist(), name=f"{lattice.name}*", gram=gram)


def denominator(coords: Sequence) -> int:
    """Least ``q >= 1`` with ``q * coords`` integral."""
    return reduce(math.lcm, (Fraction(c).denominator for c in coords), 1)


@dataclass(frozen=True)
class DualPoint:
    """A point of ``Q Lambda*`` in dual-basis coordinates."""

    coords: tuple[Fraction, ...]

    @cached_property
    def q(self) -> int:
        return denominator(self.coords)

    def __str__(self) -> str:
        return "(" + ", ".join(str(c) for c in self.coords) + ")"


@dataclass(frozen=True)
class DiffractionPeak:
    location: DualPoint
    norm: float
    intensity: float
    series: float
    residual: float
    tail_bound: float

    @property
    def q(self) -> int:
        return self.location.q

    @property
    def consistent(self) -> bool:
        return self.residual <= self.tail_bound


# ---------------------------------------------------------------------------
# autocorrelation


def autocorr_weight_closed(config: KFreeConfig, a: Sequence[int]) -> float:
    s = config.nk
    det = config.lattice.det
    c = k_content(config, a)
    if math.isinf(c):
        # prod (1 - 2/p^s)(1 + 1/(p^s - 2)) = prod (1 - 1/p^s)
        return 1.0 / (zeta(s) * det)
    w = xi(s).value
    for p, _ in factorize(int(c)):
        w *= 1 + 1 / (p**s - 2)
    return w / det


def autocorr_weight_empirical(
    config: KFreeConfig, a: Sequence[int], R, *, threads: int = 1, max_points: float = MAX_POINTS
) -> float:
    """``#{x in V cap B_R : x - a in V cap B_R} / (R^n v_n)``."""
    r = as_radius(R)
    shift = np.asarray([int(v) for v in a], dtype=np.int64)

    def count(x):
        ok = kfree_mask(config, x)
        y = x - shift
        ok &= kfree_mask(config, y)
        ok &= in_ball_mask(config.lattice, None, r, y)
        return int(ok.sum())

    total = sum(scan_ball(config.lattice, None, r, count, threads=threads, max_points=max_points))
    return total / ball_volume(config.n, r)


# ---------------------------------------------------------------------------
# diffraction


def diffraction_intensity(config: KFreeConfig, q: int) -> float:
    if q < 1:
        raise ValueError("q must be a positive integer")
    if not is_kfree_int(q, config.k + 1):
        return 0.0
    s = config.nk
    val = 1.0 / zeta(s) ** 2
    for p, _ in factorize(q):
        val /= (p**s - 1) ** 2
    return val / config.lattice.det_sq


def series_tail_bound(config: KFreeConfig, dmax: int = SERIES_DMAX) -> float:
    """Bound on the omitted coefficients ``sum_{d > dmax}``.

    Each coefficient is at most ``xi * 2^omega(d) / d^2s <= xi * 2 sqrt(d) / d^2s``
    (as ``p^2s - 2p^s >= p^2s/2`` for ``p^s >= 4``), and the integral test bounds the sum.
    """
    s = config.nk
    return xi(s).value * 2 * dmax ** (1.5 - 2 * s) / (2 * s - 1.5) / float(config.lattice.det_sq)


def series_intensity(config: KFreeConfig, q: int, dmax: int = SERIES_DMAX) -> float:
    """Truncated comb-coefficient sum over squarefree ``d <= dmax`` with ``q | d^k``."""
    s = config.nk
    total = 0.0
    for d in range(1, dmax + 1):
        if moebius(d) == 0 or pow(d, config.k, q) != 0:
            continue
        c = 1.0
        for p, _ in factorize(d):
            c /= p ** (2 * s) - 2 * p**s
        total += c
    return xi(s).value * total / float(config.lattice.det_sq)


def peak_list(
    config: KFreeConfig, dual_radius, q_max: int, *, dmax: int = SERIES_DMAX, max_points: float = MAX_POINTS
) -> list[DiffractionPeak]:
    """Peaks at points of ``Q Lambda*`` of norm below ``dual_radius`` with
    (k+1)-free denominator ``q <= q_max``, sorted by norm then coordinates."""
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    r = as_radius(dual_radius)
    dual = dual_basis(config.lattice)
    tail = series_tail_bound(config, dmax)
    series_cache: dict[int, float] = {}
    peaks = []
    for q in range(1, q_max + 1):
        if not is_kfree_int(q, config.k + 1):
            continue
        inten = diffraction_intensity(config, q)
        if q not in series_cache:
            series_cache[q] = series_intensity(config, q, dmax)
        ser = series_cache[q]
        resid = abs(ser - inten)
        # y = m/q inside the ball  <=>  m inside the ball of radius q*r
        for m in enumerate_ball(dual, None, Radius(r.sq * q * q), max_points=max_points).tolist():
            if math.gcd(q, *m) != 1:
                continue
            loc = DualPoint(tuple(Fraction(v, q) for v in m))
            nrm = math.sqrt(float(dual.norm_sq(loc.coords)))
            peaks.append(DiffractionPeak(loc, nrm, inten, ser, resid, tail + 1e-15))
    peaks.sort(key=lambda pk: (pk.norm, pk.location.coords))
    return peaks


# ---------------------------------------------------------------------------
# difference set


@dataclass
class DifferenceReport:
    radius: Radius
    search_radius: Radius
    witnesses: dict[tuple[int, ...], tuple[int, ...]]
    missing: list[tuple[int, ...]]

    @property
    def passed(self) -> bool:
        return not self.missing


def difference_set_check(config: KFreeConfig, radius, search_radius=100) -> DifferenceReport:
    """For each ``a`` in the ball find ``x`` with ``x`` and ``x - a`` both in V.

    Candidates ``x`` are tried in order of increasing norm.  A missing entry
    only means the search budget ran out.
    """
    r, sr = as_radius(radius), as_radius(search_radius)
    targets = enumerate_ball(config.lattice, None, r)
    cand = enumerate_ball(config.lattice, None, sr)
    norms = np.array([float(config.lattice.norm_sq(p)) for p in cand.tolist()]) if config.n > 0 else None
    order = np.lexsort((*cand.T[::-1], norms))
    cand = cand[order]
    cand = cand[kfree_mask(config, cand)]
    witnesses, missing = {}, []
    for a in targets.tolist():
        hit = kfree_mask(config, cand - np.asarray(a, dtype=np.int64))
        idx = int(np.argmax(hit)) if hit.any() else -1
        if idx < 0:
            missing.append(tuple(a))
            continue
        x = tuple(int(v) for v in cand[idx])
        assert is_k_free(config, x) and is_k_free(config, [u - v for u, v in zip(x, a)])
        witnesses[tuple(a)] = x
    return DifferenceReport(r, sr, witnesses, missing)
