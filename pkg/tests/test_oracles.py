import numpy as np
import pytest

from rapm.oracles import (
    F_eta_value,
    ParameterError,
    ProblemSpec,
    SmoothOracle,
    f_eta_value,
    grad_f_eta,
    lipschitz_L_eta,
    q_map,
    quadratic_oracle,
    validate_problem,
)
from rapm.prox import Box, L1Ball, Zero
from rapm.numerics import norm1


def _quad_problem(n=3, omega=None):
    # h = |x|^2/2, f = |x - e1|^2/2
    e1 = np.zeros(n)
    e1[0] = 1.0
    return ProblemSpec(
        upper=quadratic_oracle(np.eye(n), -e1, 0.5),
        lower=quadratic_oracle(np.eye(n)),
        nonsmooth=omega or Zero(),
        dimension=n,
    )


def _fd(fun, x, step=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g


def test_f_eta_examples(box2):
    p = _quad_problem()
    assert f_eta_value(p, 1.0, np.zeros(3)) == 0.5
    # h = c.x, f = |x - p|^2/2
    assert f_eta_value(box2, 0.1, np.array([1.0, 1.0])) == pytest.approx(1.017, abs=1e-15)
    # zero case: point where both vanish
    z = ProblemSpec(quadratic_oracle(np.eye(2)), quadratic_oracle(np.eye(2)), Zero(), 2)
    assert f_eta_value(z, 123.0, np.zeros(2)) == 0.0
    with pytest.raises(ParameterError):
        f_eta_value(p, 0.0, np.zeros(3))


def test_F_eta_examples():
    p = _quad_problem()
    x = np.array([0.2, -0.1, 0.4])
    assert F_eta_value(p, 0.3, x) == f_eta_value(p, 0.3, x)
    pb = _quad_problem(omega=Box.unit(3))
    xi = np.array([0.2, 0.5, 0.9])
    assert F_eta_value(pb, 0.3, xi) == f_eta_value(pb, 0.3, xi)
    assert F_eta_value(pb, 0.3, np.array([1.2, 0.5, 0.9])) == np.inf


def test_grad_f_eta_examples():
    p = _quad_problem()
    assert np.array_equal(grad_f_eta(p, 1.0, np.zeros(3)), [-1.0, 0.0, 0.0])
    # joint stationary point of h = |x|^2/2 and f = |x|^2
    q = ProblemSpec(quadratic_oracle(2 * np.eye(2)), quadratic_oracle(np.eye(2)), Zero(), 2)
    assert np.array_equal(grad_f_eta(q, 0.7, np.zeros(2)), [0.0, 0.0])
    with pytest.raises(ParameterError):
        grad_f_eta(p, -1.0, np.zeros(3))


def test_grad_f_eta_finite_differences():
    g = np.random.default_rng(5)
    for _ in range(10):
        M1, M2 = g.standard_normal((2, 4, 4))
        p = ProblemSpec(
            quadratic_oracle(M1 @ M1.T, g.standard_normal(4)),
            quadratic_oracle(M2 @ M2.T, g.standard_normal(4)),
            Zero(),
            4,
        )
        eta = float(g.uniform(0.1, 2))
        x = g.standard_normal(4)
        grad = grad_f_eta(p, eta, x)
        fd = _fd(lambda z: f_eta_value(p, eta, z), x)
        assert np.max(np.abs(grad - fd)) <= 1e-6 * (1 + np.max(np.abs(grad)))


def test_grad_f_eta_linear_in_eta():
    g = np.random.default_rng(1)
    p = _quad_problem(4)
    for _ in range(20):
        x, eta = g.standard_normal(4), float(g.uniform(0.01, 10))
        parts = p.lower.gradient(x) + eta * p.upper.gradient(x)
        assert np.max(np.abs(grad_f_eta(p, eta, x) - parts)) <= 1e-14 * (1 + np.max(np.abs(parts)))


def test_q_map_examples(quad_1d):
    assert q_map(quad_1d, 1.0, 0.5, np.array([0.0]))[0] == 1.0
    # fixed point of the regularized problem x + (x - 2) = 0
    assert abs(q_map(quad_1d, 1.0, 0.5, np.array([1.0]))[0] - 1.0) <= 1e-10
    pb = _quad_problem(3, omega=L1Ball(1.0))
    out = q_map(pb, 1.0, 0.5, np.array([5.0, -3.0, 2.0]))
    assert norm1(out) <= 1.0 + 1e-12


def test_q_map_step_violation_names_bound(quad_1d):
    with pytest.raises(ParameterError, match="0.5"):
        q_map(quad_1d, 1.0, 0.6, np.array([0.0]))


def test_q_map_zero_omega_is_gradient_step():
    g = np.random.default_rng(2)
    p = _quad_problem(5)
    for eta in (0.01, 1.0, 7.0):
        gamma = 1.0 / lipschitz_L_eta(p, eta)
        x = g.standard_normal(5)
        assert np.array_equal(q_map(p, eta, gamma, x), x - gamma * grad_f_eta(p, eta, x))


def test_lipschitz_L_eta_examples():
    def prob(Lh, Lf):
        return ProblemSpec(
            SmoothOracle(lambda x: 0.0, lambda x: x, Lf), SmoothOracle(lambda x: 0.0, lambda x: x, Lh), Zero(), 1
        )

    assert lipschitz_L_eta(prob(2, 3), 1.0) == 5.0
    assert lipschitz_L_eta(prob(0, 1), 0.5) == 0.5
    assert lipschitz_L_eta(prob(1, 10), 1 / (9 + 1)) == pytest.approx(2.0, rel=1e-15)


def test_descent_inequality_on_sampled_pairs(sparse_reg):
    p = sparse_reg
    eta = 0.05
    gamma = 1.0 / lipschitz_L_eta(p, eta)
    g = np.random.default_rng(11)
    for _ in range(200):
        x = p.nonsmooth.prox(g.standard_normal(p.dimension) * 0.3, 1.0)
        y = g.standard_normal(p.dimension) * 0.3
        qy = q_map(p, eta, gamma, y)
        Fx = F_eta_value(p, eta, x)
        lhs = Fx - F_eta_value(p, eta, qy)
        rhs = np.dot(y - x, qy - y) / gamma + np.dot(qy - y, qy - y) / (2 * gamma)
        assert lhs >= rhs - 1e-9 * (1 + abs(Fx))


def test_validate_well_formed(box20, sparse_reg):
    assert validate_problem(box20).passed
    assert validate_problem(sparse_reg).passed


def test_validate_catches_halved_lipschitz(sparse_reg):
    p = sparse_reg
    up = p.upper
    bad = ProblemSpec(
        upper=SmoothOracle(up.value, up.gradient, up.lipschitz / 2),
        lower=p.lower,
        nonsmooth=p.nonsmooth,
        dimension=p.dimension,
    )
    rep = validate_problem(bad)
    assert not rep["upper: Lipschitz constant"].passed
    assert rep["lower: Lipschitz constant"].passed


def test_validate_catches_nonconvex():
    n = 3
    bad = ProblemSpec(
        upper=quadratic_oracle(-np.eye(n), lipschitz=1.0),
        lower=quadratic_oracle(np.eye(n)),
        nonsmooth=Zero(),
        dimension=n,
    )
    rep = validate_problem(bad)
    assert not rep["upper: midpoint convexity"].passed
    assert not rep.passed


def test_validate_catches_wrong_ground_truth(box2):
    import dataclasses

    gt = dataclasses.replace(box2.ground_truth, f_star=0.2)
    p = dataclasses.replace(box2, ground_truth=gt)
    assert not validate_problem(p)["ground truth: f(x*) = f*"].passed


def test_nonpositive_lipschitz_rejected():
    with pytest.raises(ParameterError):
        SmoothOracle(lambda x: 0.0, lambda x: x, -1.0)
