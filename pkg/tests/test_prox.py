import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapm.numerics import norm1, norm2
from rapm.prox import Box, L1Ball, L1Norm, Zero, certify_prox, probe_points, project_l1_ball, prox, soft_threshold


# -- independent oracles -----------------------------------------------------

def grid_refine_prox(op, u, gamma, levels=40, pts=None):
    """Brute-force argmin of gamma*op(z) + |z-u|^2/2 by repeated grid refinement."""
    n = u.size
    pts = pts or {1: 81, 2: 41, 3: 21}[n]
    centre = u.copy()
    half = 2.0 * (np.max(np.abs(u)) + 2.0)

    def obj(Z):
        vals = 0.5 * np.sum((Z - u) ** 2, axis=1)
        pen = np.array([op.value(z) for z in Z])
        return vals + gamma * pen

    if isinstance(op, Box):
        lo, hi = op.lo, op.hi
    elif isinstance(op, L1Ball):
        lo, hi = np.full(n, -op.radius), np.full(n, op.radius)
    else:
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
    centre = np.clip(centre, lo, hi)
    for _ in range(levels):
        axes = [
            np.linspace(max(c - half, a), min(c + half, b), pts) for c, a, b in zip(centre, lo, hi)
        ]
        Z = np.array(list(itertools.product(*axes)))
        best = Z[np.argmin(obj(Z))]
        centre = best
        half /= 4.0
        if half < 1e-10:
            break
    return centre


def kkt_l1_projection(u, r):
    """Projection onto the l1 ball by enumerating supports and sign patterns."""
    if np.abs(u).sum() <= r:
        return u.copy()
    n = u.size
    best, best_d = None, np.inf
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            for signs in itertools.product((-1.0, 1.0), repeat=size):
                s = np.array(signs)
                idx = list(S)
                theta = (np.dot(s, u[idx]) - r) / size
                if theta < 0:
                    continue
                z = np.zeros(n)
                z[idx] = u[idx] - theta * s
                if np.any(z[idx] * s <= 0):
                    continue
                off = [i for i in range(n) if i not in S]
                if np.any(np.abs(u[off]) > theta + 1e-15):
                    continue
                d = np.sum((z - u) ** 2)
                if d < best_d:
                    best, best_d = z, d
    return best


# -- documented examples -----------------------------------------------------

def test_prox_examples():
    assert np.array_equal(prox(Zero(), np.array([1.0, -2.0]), 0.5), [1.0, -2.0])
    assert np.array_equal(prox(L1Norm(1.0), np.array([2.0, -0.5, 0.0]), 1.0), [1.0, 0.0, 0.0])
    assert np.array_equal(prox(L1Ball(1.0), np.array([2.0, 1.0]), 0.3), [1.0, 0.0])
    assert np.array_equal(prox(Box.unit(3), np.array([-0.3, 0.5, 2.0]), 7.0), [0.0, 0.5, 1.0])


def test_project_l1_examples():
    assert np.array_equal(project_l1_ball([0.3, -0.2], 1.0), [0.3, -0.2])
    assert np.array_equal(project_l1_ball([3.0, 0.0], 1.0), [1.0, 0.0])
    assert np.array_equal(project_l1_ball([2.0, 1.0], 1.0), [1.0, 0.0])


@pytest.mark.parametrize(
    "u",
    [[0.3, -0.2], [3.0, 0.0], [2.0, 1.0], [1.0, 1.0], [-2.0, 0.5], [0.75, 0.75], [0.0, -4.0]],
)
def test_l1_projection_matches_2d_kkt_oracle(u):
    u = np.array(u)
    assert np.array_equal(project_l1_ball(u, 1.0), kkt_l1_projection(u, 1.0))


def test_parameter_errors():
    with pytest.raises(ValueError):
        prox(Zero(), np.ones(2), 0.0)
    with pytest.raises(ValueError):
        project_l1_ball(np.ones(2), 0.0)
    with pytest.raises(ValueError):
        L1Ball(-1.0)
    with pytest.raises(ValueError):
        L1Norm(-0.1)
    with pytest.raises(ValueError):
        Box(np.array([1.0]), np.array([0.0]))


def test_soft_threshold_kink_gives_exact_zero():
    out = soft_threshold(np.array([1.0, -1.0, 1.0 + 1e-12]), 1.0)
    assert out[0] == 0.0 and out[1] == 0.0 and out[2] > 0


def test_indicator_values():
    assert L1Ball(1.0).value(np.array([0.5, 0.5])) == 0.0
    assert L1Ball(1.0).value(np.array([0.8, 0.5])) == np.inf
    assert Box.unit(2).value(np.array([1.5, 0.0])) == np.inf


# -- certificate -------------------------------------------------------------

def test_certify_examples():
    r = certify_prox(Zero(), np.array([1.0, 2.0]), np.array([1.0, 2.0]), 0.7)
    assert r.passed and r.margin == 0.0
    assert certify_prox(L1Norm(1.0), np.array([2.0, 0.5]), np.array([1.0, 0.0]), 1.0).passed
    r = certify_prox(L1Ball(1.0), np.array([2.0, 1.0]), np.array([0.9, 0.0]), 1.0)
    assert not r.passed and r.margin < -1e-3


def test_certify_rejects_infeasible_point():
    r = certify_prox(Box.unit(2), np.array([2.0, 2.0]), np.array([1.1, 1.0]), 1.0)
    assert not r.passed


def test_probe_sets():
    assert probe_points(L1Ball(2.0), np.zeros(3)).shape == (6, 3)
    assert probe_points(Box.unit(4), np.zeros(4)).shape == (16, 4)
    assert probe_points(Box.unit(13), np.zeros(13)).shape == (128, 13)


def _random_op(g, n):
    kind = g.integers(4)
    if kind == 0:
        return Zero()
    if kind == 1:
        return L1Norm(float(g.uniform(0, 2)))
    if kind == 2:
        return L1Ball(float(g.uniform(0.1, 3)))
    lo = g.uniform(-1, 0.5, n)
    return Box(lo, lo + g.uniform(0, 1.5, n))


def test_certify_passes_on_1000_seeded_triples():
    g = np.random.default_rng(2024)
    worst = np.inf
    for _ in range(1000):
        n = int(g.integers(1, 16))
        op = _random_op(g, n)
        u = g.normal(scale=2.0, size=n)
        gamma = float(g.uniform(0.01, 3.0))
        r = certify_prox(op, u, prox(op, u, gamma), gamma, tol=1e-8)
        assert r.passed, (op, u, gamma, r)
        worst = min(worst, r.margin)
    assert worst >= -1e-8


@pytest.mark.parametrize("seed", range(12))
def test_prox_matches_grid_refinement(seed):
    g = np.random.default_rng(seed)
    n = 1 + seed % 3
    op = _random_op(g, n)
    u = g.normal(scale=1.5, size=n)
    gamma = float(g.uniform(0.2, 2.0))
    z = prox(op, u, gamma)
    z_grid = grid_refine_prox(op, u, gamma)
    assert np.max(np.abs(z - z_grid)) <= 1e-6


# -- properties --------------------------------------------------------------

vec = st.lists(st.floats(-10, 10), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(vec, st.floats(0.05, 5.0), st.floats(0.01, 5.0))
def test_projection_idempotent_and_feasible(v, radius, gamma):
    u = np.array(v)
    for op in (L1Ball(radius), Box(-np.full(u.size, radius), np.full(u.size, radius))):
        z = prox(op, u, gamma)
        assert np.max(np.abs(prox(op, z, gamma) - z), initial=0.0) <= 1e-12 * (1 + np.max(np.abs(z)))
    assert norm1(project_l1_ball(u, radius)) <= radius + 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 10))
def test_nonexpansive(seed, n):
    g = np.random.default_rng(seed)
    op = _random_op(g, n)
    gamma = float(g.uniform(0.01, 3.0))
    u, v = g.normal(scale=3, size=n), g.normal(scale=3, size=n)
    assert norm2(prox(op, u, gamma) - prox(op, v, gamma)) <= norm2(u - v) * (1 + 1e-12) + 1e-14


@settings(max_examples=50, deadline=None)
@given(vec, st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_indicator_prox_ignores_gamma(v, g1, g2):
    u = np.array(v)
    assert np.array_equal(prox(L1Ball(1.0), u, g1), prox(L1Ball(1.0), u, g2))
