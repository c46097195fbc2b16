"""
Lattice geometry and congruence arithmetic.

Points are integer coordinate vectors with respect to the lattice basis, so
``x`` in ``m * Lambda`` is plain coordinatewise divisibility by ``m``.  Norms
go through the Gram matrix.  When the Gram matrix is rational (which covers
every preset, A2 included) ball membership is decided exactly in integer
arithmetic; otherwise a float comparison with ``BOUNDARY_EPS`` is used and
near-boundary points are counted in ``Lattice.boundary_warnings``.

All balls are OPEN: ``|x - c| < rho``.
"""
from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "BOUNDARY_EPS",
    "MAX_DIM",
    "MAX_POINTS",
    "Lattice",
    "Radius",
    "ResourceCapError",
    "as_radius",
    "ball_volume",
    "congruence_class",
    "congruence_solvable",
    "content",
    "coset_count",
    "count_congruence_solutions",
    "crt_combine",
    "diameter",
    "diameter_sq",
    "enumerate_ball",
    "in_ball_mask",
    "lattice_from_file",
    "norm",
    "predicted_count",
    "preset",
    "scan_ball",
    "solve_congruences",
]

MAX_DIM = 4
#: default cap on the predicted number of lattice points a scan may visit
MAX_POINTS = 10**9
BOUNDARY_EPS = 1e-9
#: rows of the search box handled per chunk (bounded memory, partition unit)
CHUNK_POINTS = 1 << 21

Point = tuple[int, ...]


class ResourceCapError(RuntimeError):
    """A computation would exceed a configured size cap."""

    def __init__(self, what: str, required: float, allowed: float):
        super().__init__(f"{what}: requires {required:.4g}, cap is {allowed:.4g}")
        self.required = required
        self.allowed = allowed


def _to_fraction(x) -> Fraction | None:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise ValueError(f"cannot parse number {x!r}") from exc
    return None


@dataclass(frozen=True)
class Radius:
    """A ball radius stored through its exact square.

    ``Radius.sqrt(2)`` is the radius sqrt(2) exactly; float radii are taken
    at their exact binary value.
    """

    sq: Fraction | float

    def __post_init__(self):
        if not self.sq > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def sqrt(cls, m) -> "Radius":
        return cls(Fraction(m))

    @property
    def value(self) -> float:
        return math.sqrt(self.sq)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if isinstance(self.sq, Fraction):
            num, den = self.sq.numerator, self.sq.denominator
            rn, rd = math.isqrt(num), math.isqrt(den)
            if rn * rn == num and rd * rd == den:
                return str(Fraction(rn, rd))
            if den == 1:
                return f"sqrt({num})"
            return f"sqrt({num}/{den})"
        return repr(self.value)


_SQRT_RE = re.compile(r"^sqrt\(?\s*([0-9./]+)\s*\)?$")


def as_radius(rho) -> Radius:
    """Coerce ``rho`` (number, ``Radius`` or text like ``"sqrt2"``) to a ``Radius``."""
    if isinstance(rho, Radius):
        return rho
    if isinstance(rho, str):
        text = rho.strip().lower()
        m = _SQRT_RE.match(text)
        if m:
            return Radius(Fraction(m.group(1)))
        fr = Fraction(text)
    elif isinstance(rho, (int, np.integer, Fraction)):
        fr = Fraction(rho)
    else:
        fr = Fraction(float(rho))
    if fr < 0:
        raise ValueError(f"radius must be non-negative, got {rho}")
    return Radius(fr * fr)


def ball_volume(n: int, rho) -> float:
    """Volume ``rho^n v_n`` of the n-ball."""
    r = as_radius(rho)
    return float(r.sq) ** (n / 2) * math.pi ** (n / 2) / math.gamma(1 + n / 2)


@dataclass(frozen=True, eq=False)
class Lattice:
    """A full-rank lattice in R^n, 1 <= n <= 4.

    ``basis`` rows are the basis vectors (floats, for display and the dual);
    ``gram_exact`` holds the Gram matrix as Fractions when it is rational.
    """

    basis: np.ndarray
    gram_exact: tuple[tuple[Fraction, ...], ...] | None
    name: str = "lattice"
    boundary_warnings: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("basis must be a square matrix")
        if not 1 <= b.shape[0] <= MAX_DIM:
            raise ValueError(f"dimension must be between 1 and {MAX_DIM}")
        object.__setattr__(self, "basis", b)
        g = self.gram
        if not np.allclose(g, g.T) or np.linalg.eigvalsh(g).min() <= 0:
            raise ValueError("basis is degenerate (Gram matrix not positive definite)")
        if self.exact:
            # cheap consistency check between the two Gram representations
            if not np.allclose(np.array(self.gram_exact, dtype=float), b @ b.T, rtol=1e-9, atol=1e-12):
                raise ValueError("exact Gram matrix disagrees with the basis")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_basis(cls, rows: Sequence[Sequence], name: str = "lattice", gram=None) -> "Lattice":
        """Build from basis rows; entries may be ints, Fractions, floats or ``"p/q"`` strings."""
        fr_rows = [[_to_fraction(x) for x in row] for row in rows]
        float_rows = [[float(f) if f is not None else float(x) for f, x in zip(fr, row)] for fr, row in zip(fr_rows, rows)]
        exact = None
        if gram is not None:
            exact = tuple(tuple(_to_fraction(x) if _to_fraction(x) is not None else Fraction(float(x)) for x in row) for row in gram)
        elif all(f is not None for row in fr_rows for f in row):
            n = len(fr_rows)
            exact = tuple(
                tuple(sum((fr_rows[i][t] * fr_rows[j][t] for t in range(n)), Fraction(0)) for j in range(n))
                for i in range(n)
            )
        return cls(np.array(float_rows, dtype=float), exact, name)

    # -- derived data -----------------------------------------------------

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def exact(self) -> bool:
        return self.gram_exact is not None

    @cached_property
    def gram(self) -> np.ndarray:
        if self.gram_exact is not None:
            return np.array(self.gram_exact, dtype=float)
        return self.basis @ self.basis.T

    @cached_property
    def det_sq(self) -> Fraction | float:
        """Squared determinant (exact when the Gram matrix is rational)."""
        if self.exact:
            return _fraction_det([list(r) for r in self.gram_exact])
        return float(np.linalg.det(self.gram))

    @property
    def det(self) -> float:
        return math.sqrt(self.det_sq)

    @cached_property
    def _gram_int(self) -> tuple[np.ndarray, int]:
        """(integer matrix G*D, D) with D the common denominator of the Gram entries."""
        den = reduce(math.lcm, (x.denominator for row in self.gram_exact for x in row), 1)
        return np.array([[int(x * den) for x in row] for row in self.gram_exact], dtype=object), den

    def norm_sq(self, x: Sequence) -> Fraction | float:
        v = list(x)
        if self.exact:
            g = self.gram_exact
            n = self.n
            return sum((g[i][j] * v[i] * v[j] for i in range(n) for j in range(n)), Fraction(0))
        a = np.asarray(v, dtype=float)
        return float(a @ self.gram @ a)

    @cached_property
    def lambda_sq(self) -> Fraction | float:
        """Squared length of the shortest nonzero vector (exhaustive search)."""
        bound = max(self.norm_sq(e) for e in np.eye(self.n, dtype=int).tolist())
        pts = enumerate_ball(self, [0] * self.n, Radius(bound * Fraction(1001, 1000) if self.exact else bound * 1.001))
        return min(self.norm_sq(p) for p in pts.tolist() if any(p))

    @property
    def lam(self) -> float:
        return math.sqrt(self.lambda_sq)

    @cached_property
    def point_group(self) -> list[np.ndarray]:
        """Integer matrices ``U`` (acting on coordinate columns) with ``U^T G U = G``."""
        n = self.n
        cols = []
        for i in range(n):
            gi = self.gram_exact[i][i] if self.exact else self.gram[i, i]
            r = Radius(gi * Fraction(1001, 1000) if self.exact else gi * 1.001)
            cands = [p for p in enumerate_ball(self, [0] * n, r).tolist() if self.norm_sq(p) == gi or (not self.exact and abs(self.norm_sq(p) - gi) < 1e-9)]
            cols.append(cands)
        group = []
        for choice in product(*cols):
            u = np.array(choice, dtype=np.int64).T
            if round(abs(np.linalg.det(u))) != 1:
                continue
            if self.exact:
                g = np.array(self.gram_exact, dtype=object)
                if (u.T.astype(object) @ g @ u.astype(object) == g).all():
                    group.append(u)
            elif np.allclose(u.T @ self.gram @ u, self.gram, atol=1e-9):
                group.append(u)
        return group

    def __repr__(self) -> str:
        return f"Lattice({self.name!r}, n={self.n}, det={self.det:.6g})"


def _fraction_det(m: list[list[Fraction]]) -> Fraction:
    m = [row[:] for row in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            for t in range(c, n):
                m[r][t] -= f * m[c][t]
    return det


_HALF = Fraction(1, 2)
_PRESETS = {
    "Z1": lambda: Lattice.from_basis([[1]], "Z1"),
    "Z2": lambda: Lattice.from_basis([[1, 0], [0, 1]], "Z2"),
    "Z3": lambda: Lattice.from_basis(np.eye(3, dtype=int).tolist(), "Z3"),
    "Z4": lambda: Lattice.from_basis(np.eye(4, dtype=int).tolist(), "Z4"),
    "A2": lambda: Lattice(
        np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]),
        ((Fraction(1), _HALF), (_HALF, Fraction(1))),
        "A2",
    ),
}


def preset(name: str) -> Lattice:
    """One of ``Z1``, ``Z2``, ``Z3``, ``Z4``, ``A2``."""
    try:
        return _PRESETS[name.upper()]()
    except KeyError:
        raise ValueError(f"unknown lattice preset {name!r}; choose from {sorted(_PRESETS)}") from None


def lattice_from_file(path: str | Path) -> Lattice:
    """Read a lattice description (JSON object with ``n``, ``basis`` and optional
    ``name`` / ``gram``).  Basis entries may be numbers or ``"p/q"`` strings."""
    doc = json.loads(Path(path).read_text())
    basis = doc["basis"]
    n = int(doc.get("n", len(basis)))
    if len(basis) != n or any(len(row) != n for row in basis):
        raise ValueError(f"basis must be {n}x{n}")
    return Lattice.from_basis(basis, doc.get("name", Path(path).stem), gram=doc.get("gram"))


# ---------------------------------------------------------------------------
# norms and ball scans


def norm(lattice: Lattice, point: Sequence[int]) -> float:
    return math.sqrt(lattice.norm_sq(point))


def _center_fractions(lattice: Lattice, center) -> list[Fraction] | None:
    c = [0] * lattice.n if center is None else list(center)
    if len(c) != lattice.n:
        raise ValueError("center has wrong dimension")
    fr = [_to_fraction(x) for x in c]
    if all(f is not None for f in fr):
        return fr
    try:
        return [Fraction(float(x)) for x in c]
    except (TypeError, ValueError):
        return None


def _box(lattice: Lattice, center: Sequence, r: Radius) -> list[range]:
    ginv = np.linalg.inv(lattice.gram)
    ranges = []
    for i in range(lattice.n):
        half = math.sqrt(float(r.sq) * ginv[i, i]) * (1 + 1e-12) + 1e-9
        c = float(center[i])
        ranges.append(range(math.ceil(c - half), math.floor(c + half) + 1))
    return ranges


def in_ball_mask(lattice: Lattice, center, rho, coords: np.ndarray) -> np.ndarray:
    """Boolean mask of rows of ``coords`` (shape (m, n)) strictly inside B_rho(center)."""
    r = as_radius(rho)
    coords = np.asarray(coords)
    c = _center_fractions(lattice, center)
    if lattice.exact and isinstance(r.sq, Fraction):
        gint, den = lattice._gram_int
        e = reduce(math.lcm, (x.denominator for x in c), 1)
        cint = [int(x * e) for x in c]
        rhs = den * e * e * r.sq  # compare Q * rhs.den < rhs.num
        span = int(np.abs(coords).max(initial=0)) if coords.size else 0
        ymax = e * span + max((abs(v) for v in cint), default=0)
        gmax = max(abs(int(v)) for v in gint.flat)
        big = lattice.n**2 * gmax * ymax * ymax * rhs.denominator
        if big < 2**62 and rhs.numerator < 2**62:
            y = coords.astype(np.int64) * e - np.array(cint, dtype=np.int64)
            q = np.einsum("mi,ij,mj->m", y, gint.astype(np.int64), y)
            return q * rhs.denominator < rhs.numerator
        y = coords.astype(object) * e - np.array(cint, dtype=object)
        q = ((y @ gint) * y).sum(axis=1) if y.size else np.zeros(0, dtype=object)
        return np.array([v * rhs.denominator < rhs.numerator for v in q], dtype=bool)
    y = coords.astype(float) - np.array([float(x) for x in center], dtype=float)
    q = np.einsum("mi,ij,mj->m", y, lattice.gram, y)
    rsq = float(r.sq)
    near = np.abs(q - rsq) <= BOUNDARY_EPS * max(1.0, rsq)
    if near.any():
        lattice.boundary_warnings.append(int(near.sum()))
    return q < rsq


def predicted_count(lattice: Lattice, rho) -> float:
    return ball_volume(lattice.n, rho) / lattice.det


def _box_chunks(ranges: list[range]) -> Iterator[np.ndarray]:
    """Yield the search box as (m, n) int64 arrays, split along coordinate 0."""
    n = len(ranges)
    inner = math.prod(len(r) for r in ranges[1:])
    rows = max(1, CHUNK_POINTS // max(inner, 1))
    r0 = ranges[0]
    grids = np.meshgrid(*[np.arange(r.start, r.stop, dtype=np.int64) for r in ranges[1:]], indexing="ij") if n > 1 else []
    tail = np.stack([g.ravel() for g in grids], axis=1) if n > 1 else np.zeros((1, 0), dtype=np.int64)
    for start in range(r0.start, r0.stop, rows):
        first = np.arange(start, min(start + rows, r0.stop), dtype=np.int64)
        block = np.empty((len(first) * len(tail), n), dtype=np.int64)
        block[:, 0] = np.repeat(first, len(tail))
        if n > 1:
            block[:, 1:] = np.tile(tail, (len(first), 1))
        yield block


def scan_ball(
    lattice: Lattice,
    center,
    rho,
    fn: Callable[[np.ndarray], object],
    *,
    threads: int = 1,
    max_points: float = MAX_POINTS,
) -> list:
    """Apply ``fn`` to the lattice points of the open ball, chunk by chunk.

    The box around the ball is cut into disjoint slabs along the first
    coordinate; ``fn`` receives each slab's in-ball points as an (m, n) int64
    array.  Results come back in slab order whatever ``threads`` is, so any
    exact reduction over them is partition- and thread-independent.
    """
    r = as_radius(rho)
    need = predicted_count(lattice, r)
    if need > max_points:
        raise ResourceCapError("ball enumeration", need, max_points)
    c = _center_fractions(lattice, center)
    ranges = _box(lattice, c, r)

    def work(block: np.ndarray):
        return fn(block[in_ball_mask(lattice, c, r, block)])

    if threads <= 1:
        return [work(b) for b in _box_chunks(ranges)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, _box_chunks(ranges)))


def enumerate_ball(lattice: Lattice, center, rho, *, max_points: float = MAX_POINTS, threads: int = 1) -> np.ndarray:
    """All lattice points with ``|x - center| < rho``, as a lexicographically
    sorted (m, n) int64 array of basis coordinates."""
    parts = scan_ball(lattice, center, rho, lambda a: a, threads=threads, max_points=max_points)
    pts = np.concatenate(parts) if parts else np.zeros((0, lattice.n), dtype=np.int64)
    return pts[np.lexsort(pts.T[::-1])] if len(pts) else pts


# ---------------------------------------------------------------------------
# congruences


def content(point: Sequence[int]) -> int | float:
    """gcd of the coordinates (the 1-content); ``math.inf`` for the origin."""
    g = math.gcd(*(int(v) for v in point))
    return math.inf if g == 0 else g


def _divides(d: int, c: int | float) -> bool:
    return c == math.inf or c % d == 0


def solve_congruences(residues: Sequence[int], moduli: Sequence[int]) -> tuple[int, int] | None:
    """Scalar CRT for arbitrary moduli: ``(x, lcm)`` or ``None`` if inconsistent."""
    x, m = 0, 1
    for a, mi in zip(residues, moduli):
        if mi < 1:
            raise ValueError("moduli must be positive")
        g = math.gcd(m, mi)
        if (a - x) % g:
            return None
        # x + m*u = a (mod mi)  =>  u = (a-x)/g * inv(m/g) mod mi/g
        mg = mi // g
        u = ((a - x) // g) * pow(m // g, -1, mg) % mg if mg > 1 else 0
        x += m * u
        m = m * mg
        x %= m
    return x, m


def crt_combine(residues: Sequence[tuple[Sequence[int], int]]) -> tuple[Point, int]:
    """Combine ``x = p_i (mod m_i Lambda)`` for pairwise coprime ``m_i``.

    Returns ``(t, M)`` with ``M = prod m_i`` and ``0 <= t_j < M``.
    """
    if not residues:
        raise ValueError("need at least one congruence")
    moduli = [int(m) for _, m in residues]
    for i in range(len(moduli)):
        for j in range(i + 1, len(moduli)):
            if math.gcd(moduli[i], moduli[j]) != 1:
                raise ValueError(f"moduli {moduli[i]} and {moduli[j]} are not coprime")
    n = len(residues[0][0])
    t = []
    for coord in range(n):
        x, _ = solve_congruences([int(p[coord]) for p, _ in residues], moduli)
        t.append(x)
    return tuple(t), math.prod(moduli)


def coset_count(points: Iterable[Sequence[int]], m: int) -> int:
    """Number of cosets of ``m Lambda`` represented by ``points``."""
    return len({tuple(int(v) % m for v in p) for p in points})


def diameter_sq(points: Sequence[Sequence[int]], lattice: Lattice):
    pts = [list(p) for p in points]
    best = 0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = lattice.norm_sq([a - b for a, b in zip(pts[i], pts[j])])
            if d > best:
                best = d
    return best


def diameter(points: Sequence[Sequence[int]], lattice: Lattice) -> float:
    """Largest pairwise distance (0 for a single point)."""
    return math.sqrt(diameter_sq(points, lattice))


def congruence_solvable(lattice: Lattice, system: Sequence[tuple[int, Sequence[int]]]) -> bool:
    """Is ``t + p_i in m_i Lambda`` (all i) solvable?  ``system`` holds ``(m_i, p_i)``.

    Criterion: ``gcd(m_i, m_j)`` divides the content of ``p_i - p_j``.
    """
    items = [(int(m), list(p)) for m, p in system]
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            (mi, pi), (mj, pj) = items[i], items[j]
            if not _divides(math.gcd(mi, mj), content([a - b for a, b in zip(pi, pj)])):
                return False
    return True


def congruence_class(lattice: Lattice, system) -> tuple[Point, int] | None:
    """The single solution class ``(t0, L)`` mod ``L Lambda`` (``L`` the lcm), or None."""
    if not congruence_solvable(lattice, system):
        return None
    moduli = [int(m) for m, _ in system]
    t0 = []
    for coord in range(lattice.n):
        sol = solve_congruences([-int(p[coord]) for _, p in system], moduli)
        if sol is None:  # pragma: no cover - excluded by the gcd criterion
            raise AssertionError("solvability criterion and CRT disagree")
        t0.append(sol[0])
    return tuple(t0), math.lcm(*moduli)


def count_congruence_solutions(
    lattice: Lattice, system, center, R, *, max_points: float = MAX_POINTS, threads: int = 1
) -> int:
    """Number of ``t`` in the open ball ``B_R(center)`` with ``t + p_i in m_i Lambda``."""
    cls = congruence_class(lattice, system)
    if cls is None:
        return 0
    t0, L = cls
    r = as_radius(R)
    # t = t0 + L u  with |u - (c - t0)/L| < R/L
    c = _center_fractions(lattice, center)
    sub_c = [(ci - ti) / L for ci, ti in zip(c, t0)]
    sub_r = Radius(r.sq / (L * L)) if isinstance(r.sq, Fraction) else Radius(r.sq / L**2)
    return sum(scan_ball(lattice, sub_c, sub_r, len, threads=threads, max_points=max_points))
