import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rapm.numerics import norm1, norm2
from rapm.oracles import GroundTruth, ParameterError, ProblemSpec, q_map, quadratic_oracle
from rapm.prox import Zero
from rapm.solvers import (
    BudgetScaled,
    DivergenceError,
    Fixed,
    Scaled,
    SolverConfig,
    WeakSharp,
    airg_solve,
    bigsam_solve,
    fista_lower_solve,
    momentum_next,
    rapm_solve,
    replay_rapm,
    rpm_solve,
    select_eta,
    solve,
)


def cfg(**kw):
    kw.setdefault("eta_mode", Fixed(1.0))
    return SolverConfig(**kw)


# -- momentum ----------------------------------------------------------------

def test_momentum_examples():
    assert momentum_next(1.0) == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-15)
    t2 = momentum_next(1.0)
    t3 = momentum_next(t2)
    assert abs(t3 * t3 - t3 - t2 * t2) <= 1e-12 * t2 * t2
    with pytest.raises(ParameterError):
        momentum_next(0.5)


def test_momentum_identity_and_growth_to_one_million():
    t = 1.0
    worst_rel = 0.0
    for k in range(1, 1_000_001):
        assert t >= (k + 1) / 2
        t_next = momentum_next(t)
        worst_rel = max(worst_rel, abs(t_next * t_next - t_next - t * t) / (t * t))
        t = t_next
    assert worst_rel <= 1e-12


@settings(max_examples=200)
@given(st.floats(1.0, 1e8))
def test_momentum_identity_property(t):
    tn = momentum_next(t)
    assert tn > t
    assert abs(tn * tn - tn - t * t) <= 1e-12 * t * t


# -- eta selection -----------------------------------------------------------

def test_select_eta_examples():
    assert select_eta(BudgetScaled(), 99) == 0.01
    gt = GroundTruth(np.zeros(1), 0.0, 0.0, 0.5, None, None, alpha=1.0)
    assert select_eta(WeakSharp(), 10, gt) == 1.0
    assert select_eta(Fixed(0.05), 10) == 0.05
    with pytest.raises(ParameterError):
        select_eta(WeakSharp(), 10, None)


def test_select_eta_weak_sharp_fallback():
    gt = GroundTruth(np.zeros(1), 0.0, 0.0, 0.0, None, None, alpha=0.3)
    assert select_eta(WeakSharp(), 10, gt) == 1.0


def test_config_invariants():
    with pytest.raises(ParameterError):
        SolverConfig(K=0)
    with pytest.raises(ParameterError):
        Fixed(0.0)
    with pytest.raises(ParameterError):
        Scaled(1.5)
    with pytest.raises(ParameterError):
        Scaled(0.0)
    with pytest.raises(ParameterError):
        SolverConfig(variant="Nope")


# -- R-APM -------------------------------------------------------------------

def test_rapm_1d_example(quad_1d):
    tr = rapm_solve(quad_1d, cfg(K=50, x0=np.array([0.0])))
    assert tr.gamma == 0.5 and tr.eta == 1.0
    assert tr.x[1, 0] == 1.0
    assert abs(tr.x_final[0] - 1.0) <= 1e-12


def test_rapm_1d_converges_with_shorter_step(quad_1d):
    tr = rapm_solve(quad_1d, cfg(K=300, gamma_rule=Scaled(0.2)))
    assert abs(tr.x_final[0] - 1.0) <= 1e-8


def test_rapm_fixed_point_start(quad_1d):
    tr = rapm_solve(quad_1d, cfg(K=20, x0=np.array([1.0])))
    assert np.all(tr.x == 1.0)


def test_rapm_weak_sharp_box_reaches_closed_form(box20):
    tr = rapm_solve(box20, SolverConfig(K=2000, eta_mode=WeakSharp()))
    assert norm2(tr.x_final - box20.ground_truth.x_star) <= 1e-4


def test_trace_shape_and_t_sequence(box20):
    tr = rapm_solve(box20, SolverConfig(K=50, record_every=7))
    assert list(tr.k) == [0, 7, 14, 21, 28, 35, 42, 49, 50]
    full = rapm_solve(box20, SolverConfig(K=50))
    assert len(full) == 51
    assert full.t[1] == 1.0
    assert np.all(np.diff(full.t[1:]) > 0)


def test_replay_bit_identical(sparse_reg):
    tr = rapm_solve(sparse_reg, SolverConfig(K=200))
    xs, ts = replay_rapm(sparse_reg, tr)
    assert np.array_equal(xs, tr.x[1:])
    assert np.array_equal(ts, tr.t[1:])


def test_determinism(sparse_reg):
    a = rapm_solve(sparse_reg, SolverConfig(K=100))
    b = rapm_solve(sparse_reg, SolverConfig(K=100))
    for col in ("x", "y", "t", "f", "h", "omega", "F_eta"):
        assert np.array_equal(getattr(a, col), getattr(b, col))


@pytest.mark.parametrize("variant", ["RAPM", "RPM", "aIRG", "FISTALower"])
def test_iterates_feasible(variant, sparse_reg, box20):
    for p in (sparse_reg, box20):
        tr = solve(p, SolverConfig(variant=variant, K=300))
        for x in tr.x:
            assert p.nonsmooth.contains(x)
        if isinstance(p.nonsmooth, type(sparse_reg.nonsmooth)):
            assert np.max([norm1(x) for x in tr.x]) <= p.nonsmooth.radius + 1e-10


def test_divergence_guard_keeps_partial_trace():
    # declared Lipschitz constant far too small, so gamma = 1/L_eta overshoots
    n = 2
    up = quadratic_oracle(10.0 * np.eye(n), lipschitz=0.01)
    p = ProblemSpec(up, quadratic_oracle(np.zeros((n, n)), lipschitz=0.0), Zero(), n, key="bad")
    with pytest.raises(DivergenceError) as e:
        rapm_solve(p, SolverConfig(K=5000, eta_mode=Fixed(1.0), x0=np.ones(n)))
    err = e.value
    assert err.last_k >= 1
    assert err.trace is not None and err.trace.k[-1] <= err.last_k
    assert np.all(np.isfinite(err.trace.x))


# -- RPM ---------------------------------------------------------------------

def test_rpm_slower_than_rapm(quad_1d):
    c = cfg(K=100, gamma_rule=Scaled(0.05))
    fa = rapm_solve(quad_1d, c).F_eta[-1] - 1.0
    fr = rpm_solve(quad_1d, c).F_eta[-1] - 1.0
    assert fr > fa


def test_rpm_fixed_point_and_monotone(quad_1d, sparse_reg):
    tr = rpm_solve(quad_1d, cfg(K=10, x0=np.array([1.0])))
    assert np.all(tr.x == 1.0)
    tr = rpm_solve(sparse_reg, SolverConfig(K=300))
    assert np.all(np.diff(tr.F_eta) <= 1e-12)


# -- lower-level FISTA -------------------------------------------------------

def test_fista_lower_converges_to_b():
    b = np.array([1.0, -2.0, 0.5])
    h = quadratic_oracle(np.eye(3), -b, 0.5 * b @ b)
    p = ProblemSpec(quadratic_oracle(np.eye(3)), h, Zero(), 3)
    for K in (1, 10, 100):
        tr = fista_lower_solve(p, K)
        gap = tr.h_bar[-1]
        assert gap <= 2 * 1.0 * (b @ b) / (K + 1) ** 2 + 1e-14
    assert norm2(fista_lower_solve(p, 200).x_final - b) <= 1e-8
    assert np.array_equal(fista_lower_solve(p, 20, x0=b).x_final, b)


def test_fista_lower_box_reaches_zero(box20):
    tr = fista_lower_solve(box20, 500)
    assert abs(tr.h_bar[-1]) <= 1e-10


# -- BiG-SAM -----------------------------------------------------------------

def test_bigsam_with_constant_lower_level():
    n = 3
    p = ProblemSpec(
        quadratic_oracle(np.eye(n), -np.ones(n)),
        quadratic_oracle(np.zeros((n, n)), lipschitz=0.0),
        Zero(),
        n,
    )
    tr = bigsam_solve(p, SolverConfig(variant="BiGSAM", K=200))
    assert np.all(np.isfinite(tr.x)) and np.all(np.isfinite(tr.f))


def test_bigsam_first_step_follows_weight_rule(quad_1d):
    # alpha_1 = 1 makes the first iterate the pure upper-level gradient step
    tr = bigsam_solve(quad_1d, SolverConfig(variant="BiGSAM", K=2000, x0=np.zeros(1)))
    assert tr.x[1, 0] == 2.0
    assert abs(tr.x_final[0]) < abs(tr.x[1, 0])
    assert abs(tr.x_final[0]) <= 1e-2


def test_bigsam_sparse_regression_finite(sparse_reg):
    tr = bigsam_solve(sparse_reg, SolverConfig(variant="BiGSAM", K=3000, record_every=100))
    assert tr.k[-1] == 3000 and np.all(np.isfinite(tr.x))


# -- a-IRG -------------------------------------------------------------------

def test_airg_first_step_is_q_map(sparse_reg):
    tr = airg_solve(sparse_reg, SolverConfig(variant="aIRG", K=3))
    g0 = tr.extra["gamma0"]
    assert np.array_equal(tr.x[1], q_map(sparse_reg, 1.0, g0, tr.x[0]))


def test_airg_average_feasible(sparse_reg):
    tr = airg_solve(sparse_reg, SolverConfig(variant="aIRG", K=500))
    r = sparse_reg.nonsmooth.radius
    assert all(norm1(z) <= r + 1e-10 for z in tr.extra["x_avg"])


def test_airg_not_better_than_rapm_on_box(box20):
    # both reach the closed form exactly on this problem; a-IRG needs more steps
    x_star = box20.ground_truth.x_star
    for K, strict in ((10, True), (3000, False)):
        a = airg_solve(box20, SolverConfig(variant="aIRG", K=K))
        r = rapm_solve(box20, SolverConfig(K=K, eta_mode=WeakSharp()))
        ea, er = norm2(a.x_final - x_star), norm2(r.x_final - x_star)
        assert ea > er if strict else ea >= er
