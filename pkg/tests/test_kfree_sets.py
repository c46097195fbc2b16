import math
import random
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kfree.kfree_sets import (
    INFINITE,
    KFreeConfig,
    admissible,
    density_empirical,
    find_hole,
    is_k_free,
    k_content,
    kfree_mask,
    kfree_points_in_ball,
    locator_count_empirical,
    main_term_vp_count,
    vp_locator_count,
    vp_member,
)
from kfree.lattice import enumerate_ball, preset
from kfree.patches import ball_points, patch_census


def _content_oracle(point, k):
    """Largest c with every coordinate divisible by c^k, by trying each c."""
    best = 1
    top = max(abs(v) for v in point)
    c = 2
    while c**k <= top:
        if all(v % c**k == 0 for v in point):
            best = c
        c += 1
    return best


def _random_unimodular(rng, n):
    u = np.eye(n, dtype=np.int64)
    for _ in range(6):
        i, j = rng.sample(range(n), 2)
        e = np.eye(n, dtype=np.int64)
        e[i, j] = rng.choice([-2, -1, 1, 2])
        u = u @ e
        if rng.random() < 0.3:
            p = np.eye(n, dtype=np.int64)[rng.sample(range(n), n)]
            u = u @ p
    return u


def test_config_rejects_trivial():
    with pytest.raises(ValueError):
        KFreeConfig(preset("Z1"), 1)
    with pytest.raises(ValueError):
        KFreeConfig(preset("Z2"), 0)
    assert KFreeConfig(preset("Z2"), 2).nk == 4


def test_k_content_examples(z1k2, z2k1):
    assert k_content(z1k2, (12,)) == 2 == _content_oracle((12,), 2)
    assert k_content(z2k1, (2, 4)) == 2
    assert k_content(z2k1, (0, 0)) is INFINITE
    assert k_content(z1k2, (0,)) == math.inf


@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=3), st.integers(1, 3))
@settings(max_examples=150, deadline=None)
def test_k_content_divisibility(point, k):
    if not any(point) or (len(point) == 1 and k == 1):
        return
    cfg = KFreeConfig(preset(f"Z{len(point)}"), k)
    c = k_content(cfg, point)
    for d in range(1, 51):
        in_lattice = all(v % d**k == 0 for v in point)
        assert in_lattice == (c % d == 0)


def test_k_content_brute_force():
    rng = random.Random(1)
    for _ in range(200):
        pt = tuple(rng.randint(-5000, 5000) for _ in range(2))
        if any(pt):
            assert k_content(KFreeConfig(preset("Z2"), 2), pt) == _content_oracle(pt, 2)


def test_is_k_free_examples(z1k2, z2k1):
    assert is_k_free(z1k2, (1,))
    assert not is_k_free(z1k2, (4,))
    assert is_k_free(z2k1, (3, 5))
    assert not is_k_free(z2k1, (0, 0))


def test_kfree_mask_matches_scalar(z2k2):
    rng = np.random.default_rng(2)
    pts = rng.integers(-10**5, 10**5, size=(3000, 2))
    pts[:5] = 0
    mask = kfree_mask(z2k2, pts)
    assert mask.tolist() == [is_k_free(z2k2, p) for p in pts.tolist()]


def test_gl_invariance():
    rng = random.Random(20)
    for cfg in (KFreeConfig(preset("Z2"), 1), KFreeConfig(preset("Z3"), 2)):
        pts = [tuple(rng.randint(-300, 300) for _ in range(cfg.n)) for _ in range(100)]
        for _ in range(20):
            u = _random_unimodular(rng, cfg.n)
            assert round(abs(np.linalg.det(u))) == 1
            for p in pts:
                q = tuple(int(v) for v in u @ np.array(p))
                assert k_content(cfg, p) == k_content(cfg, q)
                assert is_k_free(cfg, p) == is_k_free(cfg, q)


def test_vp_member_examples(z1k2):
    assert vp_member(z1k2, (4,), 3)
    assert not vp_member(z1k2, (4,), 2)
    assert not vp_member(z1k2, (0,), 1)
    assert not vp_member(z1k2, (0,), 30)


def test_vp_inclusions_and_periodicity(z2k1):
    cfg = KFreeConfig(preset("Z2"), 2)
    rng = random.Random(4)
    for _ in range(300):
        p = (rng.randint(-500, 500), rng.randint(-500, 500))
        if is_k_free(cfg, p):
            assert vp_member(cfg, p, 30)
        if vp_member(cfg, p, 30):
            assert vp_member(cfg, p, 6) and vp_member(cfg, p, 5)
        for P in (6, 10):
            for e in ((P**2, 0), (0, P**2)):
                q = (p[0] + e[0], p[1] + e[1])
                if any(p) and any(q):
                    assert vp_member(cfg, p, P) == vp_member(cfg, q, P)


def test_kfree_points_in_ball_examples(z1k2, z2k1):
    assert kfree_points_in_ball(z1k2, None, 5).ravel().tolist() == [-3, -2, -1, 1, 2, 3]
    got = {tuple(p) for p in kfree_points_in_ball(z2k1, None, "sqrt2").tolist()}
    assert got == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert len(kfree_points_in_ball(z2k1, None, 1)) == 0


def test_density_small_windows(z1k2):
    # squarefree count in (-100, 100) is 2 * 61
    assert density_empirical(z1k2, 100) == pytest.approx(122 / 200)


def test_admissible_examples(z1k2, z2k1):
    assert not admissible(z2k1, [(0, 0), (1, 0), (0, 1), (1, 1)])
    assert admissible(z1k2, [(-1,), (0,), (1,)])
    assert not admissible(z1k2, [(0,), (1,), (2,), (3,)])
    assert admissible(z1k2, [])


def test_admissible_monotone(z2k1):
    ball = ball_points(z2k1, "sqrt5")
    rng = random.Random(8)
    for _ in range(200):
        S = rng.sample(ball, rng.randint(1, len(ball)))
        if admissible(z2k1, S):
            for T in (S[:-1], S[1:], S[::2]):
                assert admissible(z2k1, T)


def test_locator_counts(z1k2, z2k1):
    R = 1000
    assert locator_count_empirical(z1k2, [(0,)], [], R) == len(kfree_points_in_ball(z1k2, None, R))
    assert locator_count_empirical(z2k1, [(0, 0), (1, 0), (0, 1), (1, 1)], [], 50) == 0
    n = locator_count_empirical(z1k2, [(-1,), (0,), (1,)], [], 10**5)
    assert abs(n / (2 * 10**5) - 0.12549) < 5e-3
    with pytest.raises(ValueError):
        locator_count_empirical(z1k2, [(0,)], [(0,)], 10)


def test_locator_matches_census(z2k1):
    census = patch_census(z2k1, "sqrt2", 60)
    for e in census.entries[:: max(1, len(census.entries) // 8)]:
        Q = [p for p in census.ball if p not in e.occupied]
        assert locator_count_empirical(z2k1, e.occupied, Q, 60) == e.count


def test_main_term_examples(z1k2, z2k1):
    assert main_term_vp_count(z1k2, [(0,)], 1, 30, 100) == pytest.approx(128)
    assert main_term_vp_count(z2k1, [(0, 0)], 1, 1, 10) == pytest.approx(100 * math.pi)
    assert main_term_vp_count(z2k1, [(0, 0), (1, 0), (0, 1), (1, 1)], 1, 2, 10) == 0
    with pytest.raises(ValueError):
        main_term_vp_count(z1k2, [(0,)], 2, 6, 10)


def test_vp_locator_close_to_main_term(z1k2):
    P = [(0,), (1,)]
    exact = vp_locator_count(z1k2, P, 30, 10**5, m=7, residue=(3,))
    predicted = main_term_vp_count(z1k2, P, 7, 30, 10**5)
    # period of V_30 is 900 * 7; error is at most a few periods' worth of boundary
    assert abs(exact - predicted) < 20


def test_find_hole_examples(z1k2, z2k1):
    a, M = find_hole(z1k2, [(0,), (1,)])
    assert (a, M) == ((8,), 36)
    assert not is_k_free(z1k2, (8,)) and not is_k_free(z1k2, (9,))
    a0, M0 = find_hole(z1k2, [(0,)])
    assert M0 == 4 and a0[0] % 4 == 0
    C = [tuple(p) for p in enumerate_ball(preset("Z2"), None, 3).tolist()]
    a, M = find_hole(z2k1, C)
    assert len(C) == 25
    for x in (a, tuple(v + M for v in a), tuple(v - 3 * M for v in a)):
        assert all(not is_k_free(z2k1, [c0 + x0 for c0, x0 in zip(c, x)]) for c in C)


def test_find_hole_random_sets():
    rng = random.Random(12)
    cfg = KFreeConfig(preset("Z2"), 2)
    for _ in range(10):
        C = {(rng.randint(-6, 6), rng.randint(-6, 6)) for _ in range(rng.randint(1, 6))}
        a, M = find_hole(cfg, C)
        assert all(not is_k_free(cfg, (c[0] + a[0], c[1] + a[1])) for c in C)
