"""
Elementary number theory and high-precision Euler products.

Everything here is a pure function of its arguments.  The prime table is
grown lazily (under a lock) and never shrinks, so concurrent callers see a
consistent, immutable prefix.

Euler products over primes are evaluated in ``mpmath`` at ``WORKING_DPS``
decimal digits: an explicit product over the primes up to a small cutoff,
followed by the prime-zeta expansion of the logarithm of the tail,

    log prod_{p>N} (1 - r/p^s) = -sum_{j>=1} (r^j / j) * sum_{p>N} p^(-js),

whose truncation remainder is bounded in closed form.  That bound is what
``EulerProductValue.tail_bound`` reports.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import mpmath
import numpy as np

__all__ = [
    "DomainError",
    "EulerProductValue",
    "FACTOR_LIMIT",
    "WORKING_DPS",
    "eulertail_log_bound",
    "factorize",
    "generalized_patch_product",
    "is_kfree_int",
    "moebius",
    "pi_r",
    "pi_r_direct",
    "prime_zeta",
    "primes_up_to",
    "radical",
    "tau",
    "tau_r",
    "xi",
    "zeta",
]

#: decimal digits carried through every Euler product / Dirichlet series
WORKING_DPS = 40
#: largest integer :func:`factorize` accepts (trial division by primes < 10**7)
FACTOR_LIMIT = 10**14
#: default explicit-product cutoff for the prime-zeta method
DEFAULT_CUTOFF = 1000
#: target for the truncated part of the log-tail series
_SERIES_EPS = mpmath.mpf(10) ** (-(WORKING_DPS - 8))


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


@dataclass(frozen=True)
class EulerProductValue:
    """A truncated-and-bounded Euler product.

    ``value`` is the rounded float, ``tail_bound`` an upper bound on
    ``|value_true - mp_value|``; ``mp_value`` keeps the working precision for
    callers that keep accumulating.
    """

    value: float
    tail_bound: float
    mp_value: mpmath.mpf = field(repr=False, compare=False, default=None)

    def __float__(self) -> float:
        return self.value


# ---------------------------------------------------------------------------
# primes

_sieve_lock = threading.Lock()
_sieve_limit = 1
_sieve_primes = np.zeros(0, dtype=np.int64)


def _prime_array(n: int) -> np.ndarray:
    """Primes <= n as an int64 array (shared, read-only prefix of a cache)."""
    global _sieve_limit, _sieve_primes
    if n > _sieve_limit:
        with _sieve_lock:
            if n > _sieve_limit:
                limit = max(n, 2 * _sieve_limit, 1 << 16)
                is_p = np.ones(limit + 1, dtype=bool)
                is_p[:2] = False
                is_p[4::2] = False
                for i in range(3, math.isqrt(limit) + 1, 2):
                    if is_p[i]:
                        is_p[i * i :: 2 * i] = False
                primes = np.flatnonzero(is_p).astype(np.int64)
                primes.flags.writeable = False
                _sieve_primes, _sieve_limit = primes, limit
    primes = _sieve_primes
    return primes[: np.searchsorted(primes, n, side="right")]


def primes_up_to(n: int) -> list[int]:
    """All primes ``<= n`` in increasing order."""
    if n < 2:
        return []
    return _prime_array(n).tolist()


def factorize(m: int) -> list[tuple[int, int]]:
    """Prime factorization of ``m`` as sorted ``(prime, exponent)`` pairs.

    Trial division by the sieved primes; ``m`` above ``FACTOR_LIMIT`` is
    rejected rather than risk an incomplete factorization.
    """
    m = int(m)
    if m < 1:
        raise DomainError(f"factorize needs m >= 1, got {m}")
    if m > FACTOR_LIMIT:
        raise DomainError(f"factorize is limited to m <= {FACTOR_LIMIT}, got {m}")
    out = []
    for p in _prime_array(math.isqrt(m)).tolist():
        if p * p > m:
            break
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out.append((p, e))
    if m > 1:
        out.append((m, 1))
    return out


def moebius(m: int) -> int:
    fac = factorize(m)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def radical(m: int) -> int:
    """Product of the distinct primes dividing ``m``."""
    return math.prod(p for p, _ in factorize(m))


def tau_r(m: int, r: int) -> int:
    """Number of ordered ``r``-tuples of positive integers with product ``m``."""
    if r < 2:
        raise DomainError(f"tau_r needs r >= 2, got {r}")
    return math.prod(comb(e + r - 1, r - 1) for _, e in factorize(m))


def tau(m: int) -> int:
    return tau_r(m, 2)


def is_kfree_int(g: int, k: int) -> bool:
    """True iff no prime ``p`` has ``p**k | g`` (``g >= 1``).

    Works for ``g`` beyond ``FACTOR_LIMIT`` as long as a witness prime power
    is found among the small primes or the leftover cofactor is certified
    prime by size.
    """
    g = abs(int(g))
    if g == 0:
        return False
    if k == 1:
        return g == 1
    bound = 10**7
    for p in _prime_array(min(bound, max(2, int(round(g ** (1.0 / k))) + 1))).tolist():
        pk = p**k
        if pk > g:
            return True
        if g % p == 0:
            if g % pk == 0:
                return False
            while g % p == 0:
                g //= p
    if g < bound**2:
        # cofactor is 1 or a prime: k-free because k >= 2
        return True
    raise DomainError("cofactor too large to certify k-freeness")


# ---------------------------------------------------------------------------
# zeta, prime zeta


def _check_s(s) -> None:
    if not s > 1:
        raise DomainError(f"need s > 1, got {s}")


@lru_cache(maxsize=None)
def _zeta_mp(s) -> mpmath.mpf:
    with mpmath.workdps(WORKING_DPS + 10):
        return +mpmath.zeta(s)


def zeta(s: float) -> float:
    """Riemann zeta at real ``s > 1``."""
    _check_s(s)
    return float(_zeta_mp(s))


@lru_cache(maxsize=None)
def _prime_zeta_mp(s) -> mpmath.mpf:
    # P(s) = sum_j mu(j)/j * log zeta(js); log zeta(x) ~ 2^-x so stop once the
    # next term drops below the working precision.
    dps = WORKING_DPS + 10
    with mpmath.workdps(dps):
        eps = mpmath.mpf(10) ** (-dps)
        total = mpmath.mpf(0)
        j = 1
        while True:
            x = j * mpmath.mpf(s)
            if 2 * mpmath.power(2, -x) < eps:
                break
            mu = moebius(j)
            if mu:
                total += mpmath.mpf(mu) / j * mpmath.log(_zeta_mp(x))
            j += 1
        return +total


def prime_zeta(s: float) -> float:
    """Sum of ``p**-s`` over all primes, ``s > 1``."""
    _check_s(s)
    return float(_prime_zeta_mp(s))


# ---------------------------------------------------------------------------
# Euler products


def _as_exponent(s):
    """Integral ``s`` becomes an int so that ``p**s`` stays exact."""
    if isinstance(s, (int, np.integer)):
        return int(s)
    if float(s).is_integer():
        return int(s)
    return float(s)


def eulertail_log_bound(r: float, s: float, n: int) -> float:
    """Bound on ``|log prod_{p>n} (1 - r/p^s)|``.

    Made-effective version of the classical ``1 - O(N^(1-s))`` tail estimate:
    ``r / (1 - r n^-s) * n^(1-s) / (s - 1)``; requires ``n**s > r``.
    """
    if not n**s > r:
        raise DomainError("tail bound needs n**s > r")
    return r / (1.0 - r * n ** (-s)) * n ** (1.0 - s) / (s - 1.0)


@lru_cache(maxsize=None)
def _tail_prime_sum(x, n: int) -> mpmath.mpf:
    """``sum_{p>n} p^-x`` at working precision (absolute error ~ 10^-dps)."""
    with mpmath.workdps(WORKING_DPS + 10):
        head = mpmath.fsum(mpmath.power(p, -x) for p in primes_up_to(n))
        return _prime_zeta_mp(x) - head


@lru_cache(maxsize=None)
def _pi_r_mp(r: int, s, cutoff: int) -> tuple[mpmath.mpf, mpmath.mpf]:
    """(log of prod_{p > r^(1/s)} (1 - r/p^s), bound on its absolute error)."""
    n = cutoff
    while not n**s > 2 * r:
        n *= 2
    with mpmath.workdps(WORKING_DPS + 10):
        mr, ms = mpmath.mpf(r), mpmath.mpf(s)
        head = mpmath.fsum(
            mpmath.log1p(-mr / mpmath.power(p, ms)) for p in primes_up_to(n) if p**s > r
        )
        # tail: -sum_j r^j/j * T(js), T(x) <= n^(1-x)/(x-1)
        ratio = mr / mpmath.power(n, ms)
        tail = mpmath.mpf(0)
        j = 1
        while True:
            x = j * ms
            bound_j = mpmath.power(mr, j) / j * mpmath.power(n, 1 - x) / (x - 1)
            if bound_j / (1 - ratio) < _SERIES_EPS:
                remainder = bound_j / (1 - ratio)
                break
            tail -= mpmath.power(mr, j) / j * _tail_prime_sum(j * s, n)
            j += 1
        # allowance for rounding in the ~j evaluated prime-zeta differences
        err = remainder + j * mpmath.mpf(10) ** (-WORKING_DPS)
        return head + tail, err


def _finish(log_value, log_err) -> EulerProductValue:
    with mpmath.workdps(WORKING_DPS + 10):
        v = mpmath.exp(log_value)
        bound = v * mpmath.expm1(log_err)
        return EulerProductValue(float(v), float(bound), +v)


def pi_r(r: int, s: float, cutoff: int = DEFAULT_CUTOFF) -> EulerProductValue:
    """``prod_{p > r^(1/s)} (1 - r/p^s)``.

    ``pi_r(1, s) = 1/zeta(s)``; ``pi_r(2, 2)`` is the Feller-Tornier constant.
    ``cutoff`` is the largest prime multiplied in explicitly; the rest is the
    bounded prime-zeta tail.
    """
    _check_s(s)
    if r < 0:
        raise DomainError(f"need r >= 0, got {r}")
    if r == 0:
        return EulerProductValue(1.0, 0.0, mpmath.mpf(1))
    s = _as_exponent(s)
    return _finish(*_pi_r_mp(int(r), s, int(cutoff)))


def pi_r_direct(r: int, s: float, cutoff: int = 10**6) -> EulerProductValue:
    """Plain truncated product up to ``cutoff`` with the crude effective tail bound.

    Slow and loose; kept as an independent cross-check of :func:`pi_r`.
    """
    _check_s(s)
    s = _as_exponent(s)
    ps = _prime_array(cutoff)
    ps = ps[ps.astype(float) ** s > r]
    # float128 log1p keeps the ~80k-term sum at ~1e-16 relative
    terms = np.log1p(-np.longdouble(r) / ps.astype(np.longdouble) ** s)
    log_head = mpmath.mpf(str(np.sum(terms)))
    log_err = mpmath.mpf(eulertail_log_bound(r, float(s), cutoff)) + mpmath.mpf(len(ps)) * 1e-19
    return _finish(log_head, log_err)


def xi(s: float) -> EulerProductValue:
    """``prod_p (1 - 2/p^s) = sum_m mu(m) tau(m) / m^s`` for ``s > 1``."""
    _check_s(s)
    # 2^s > 2 for s > 1, so every prime is retained by pi_r(2, s)
    return pi_r(2, s)


def generalized_patch_product(exceptional: dict[int, int], generic_r: int, s: float) -> EulerProductValue:
    """``prod_p (1 - r_p/p^s)`` with ``r_p = exceptional.get(p, generic_r)``.

    Evaluated as a finite correction to :func:`pi_r`.  Primes with
    ``p^s <= generic_r`` sit outside ``pi_r``'s range and are always
    multiplied in here.  A factor equal to zero gives an exact zero; a
    negative factor (more cosets than exist) raises :class:`DomainError`.
    """
    _check_s(s)
    s = _as_exponent(s)
    r = int(generic_r)
    for p, rp in exceptional.items():
        if not 0 <= rp <= r:
            raise DomainError(f"coset count r_{p}={rp} outside [0, {r}]")
    key = tuple(sorted((int(p), int(rp)) for p, rp in exceptional.items() if rp != r))
    return _gpp_cached(key, r, s)


@lru_cache(maxsize=1 << 16)
def _gpp_cached(key: tuple, r: int, s) -> EulerProductValue:
    exc = dict(key)
    small = [p for p in primes_up_to(int(r ** (1.0 / s)) + 2) if not p**s > r]
    with mpmath.workdps(WORKING_DPS + 10):
        corr = mpmath.mpf(1)
        for p in small:
            rp = exc.get(p, r)
            if rp == p**s:
                return EulerProductValue(0.0, 0.0, mpmath.mpf(0))
            if rp > p**s:
                raise DomainError(f"factor 1 - {rp}/{p}^{s} is negative")
            corr *= 1 - mpmath.mpf(rp) / mpmath.power(p, s)
        for p, rp in exc.items():
            if p in small:
                continue
            ps = mpmath.power(p, s)
            corr *= (1 - rp / ps) / (1 - r / ps)
        base = pi_r(r, s)
        v = corr * base.mp_value
        return EulerProductValue(float(v), float(abs(corr)) * base.tail_bound, +v)
