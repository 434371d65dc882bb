"""Problem data model and the regularized composite objects built from it.

A simple bilevel problem selects, among the minimizers of the lower-level
composite objective ``hbar = h + omega``, one that minimizes the upper-level
objective ``f``.  The regularized surrogate weights the two smooth parts as
``f_eta = h + eta * f`` and adds ``omega`` back to get ``F_eta``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .numerics import DimensionError, norm2

__all__ = [
    "ParameterError",
    "SmoothOracle",
    "GroundTruth",
    "ProblemSpec",
    "f_eta_value",
    "F_eta_value",
    "grad_f_eta",
    "q_map",
    "lipschitz_L_eta",
    "max_step",
    "Check",
    "ValidationReport",
    "validate_problem",
    "quadratic_oracle",
    "linear_oracle",
    "least_squares_oracle",
]


class ParameterError(ValueError):
    """A scalar parameter (eta, gamma, K, ...) is outside its admissible range."""


@dataclass(frozen=True)
class SmoothOracle:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float

    def __post_init__(self):
        if not self.lipschitz >= 0:
            raise ParameterError(f"Lipschitz constant must be >= 0, got {self.lipschitz}")


def quadratic_oracle(H, g=None, c=0.0, lipschitz=None):
    """``0.5 x'Hx + g'x + c``; ``lipschitz`` defaults to ``max |eig(H)|``."""
    H = np.asarray(H, dtype=np.float64)
    g = np.zeros(H.shape[0]) if g is None else np.asarray(g, dtype=np.float64)
    if lipschitz is None:
        lipschitz = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (H + H.T)))))
    return SmoothOracle(
        value=lambda x: float(0.5 * x @ (H @ x) + g @ x + c),
        gradient=lambda x: H @ x + g,
        lipschitz=lipschitz,
    )


def linear_oracle(c):
    c = np.asarray(c, dtype=np.float64)
    return SmoothOracle(value=lambda x: float(c @ x), gradient=lambda x: c.copy(), lipschitz=0.0)


def least_squares_oracle(A, b, lipschitz):
    """``0.5 * ||A x - b||**2`` with a caller-supplied gradient Lipschitz constant."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def gradient(x):
        return A.T @ (A @ x - b)

    return SmoothOracle(value=value, gradient=gradient, lipschitz=float(lipschitz))


@dataclass(frozen=True)
class GroundTruth:
    """Closed-form solution data for a bilevel problem.

    ``x_star`` is an optimal bilevel solution, ``alpha`` the weak-sharpness
    modulus of the lower-level solution set (if known).  The callables give
    Euclidean distances to the bilevel solution set ``X*`` and to the
    lower-level solution set, and the projection onto the latter.
    """

    x_star: np.ndarray
    f_star: float
    h_bar_star: float
    grad_f_at_xstar_norm: float
    dist_to_solution_set: Callable[[np.ndarray], float]
    dist_to_lower_set: Callable[[np.ndarray], float]
    project_lower_set: Optional[Callable[[np.ndarray], np.ndarray]] = None
    alpha: Optional[float] = None


@dataclass(frozen=True)
class ProblemSpec:
    upper: SmoothOracle
    lower: SmoothOracle
    nonsmooth: object
    dimension: int
    ground_truth: Optional[GroundTruth] = None
    key: str = "problem"
    # nonempty lower-level argmin is declared, not tested
    lower_argmin_nonempty: bool = True
    data: dict = field(default_factory=dict)

    def f(self, x):
        return self.upper.value(x)

    def h(self, x):
        return self.lower.value(x)

    def omega(self, x):
        return self.nonsmooth.value(x)

    def h_bar(self, x):
        w = self.omega(x)
        return np.inf if np.isinf(w) else self.lower.value(x) + w

    def check_point(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise DimensionError(f"expected a point of length {self.dimension}, got shape {x.shape}")
        return x


def _check_eta(eta):
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")


def f_eta_value(p, eta, x):
    _check_eta(eta)
    return p.lower.value(x) + eta * p.upper.value(x)


def F_eta_value(p, eta, x):
    w = p.omega(x)
    if np.isinf(w):
        return np.inf
    return f_eta_value(p, eta, x) + w


def grad_f_eta(p, eta, x):
    _check_eta(eta)
    return p.lower.gradient(x) + eta * p.upper.gradient(x)


def lipschitz_L_eta(p, eta):
    return p.lower.lipschitz + eta * p.upper.lipschitz


def max_step(L):
    return np.inf if L == 0 else 1.0 / L


def q_map(p, eta, gamma, x):
    """One proximal-gradient step on ``F_eta`` from ``x`` with step ``gamma``."""
    L = lipschitz_L_eta(p, eta)
    bound = max_step(L)
    if not 0 < gamma <= bound * (1 + 1e-12):
        raise ParameterError(f"step gamma={gamma} violates 0 < gamma <= 1/(L_h + eta*L_f) = {bound}")
    return p.nonsmooth.prox(x - gamma * grad_f_eta(p, eta, x), gamma)


@dataclass
class Check:
    name: str
    margin: float
    passed: bool
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self):
        lines = [f"{'check':<32} {'margin':>14}  status"]
        for c in self.checks:
            lines.append(f"{c.name:<32} {c.margin:>14.6e}  {'pass' if c.passed else 'FAIL'}")
        return "\n".join(lines)


def _fd_gradient(fun, x, step=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g


def _sample_points(p, rng, n_samples, scale):
    pts = rng.normal(size=(n_samples, p.dimension)) * scale
    # pull samples into dom(omega) so indicator terms stay finite
    return np.array([p.nonsmooth.prox(x, 1.0) for x in pts])


def validate_problem(p, seed=0, n_samples=20, scale=1.0, power_steps=20):
    """Sampled falsification checks on a problem's declared properties.

    Checks central-difference gradients (step 1e-5, relative tolerance
    1e-5), midpoint convexity of ``f`` and ``h`` (slack 1e-9 relative),
    the declared gradient Lipschitz constants, and ground-truth
    consistency when present.  Lipschitz pairs are refined by a few
    power-iteration steps through gradient differences, which steers them
    toward the direction of largest curvature.
    """
    rng = np.random.default_rng(seed)
    xs = _sample_points(p, rng, n_samples, scale)
    ys = _sample_points(p, rng, n_samples, scale)
    checks = []

    for label, orc in (("upper", p.upper), ("lower", p.lower)):
        worst = np.inf
        for x in xs:
            g = orc.gradient(x)
            g_fd = _fd_gradient(orc.value, x)
            worst = min(worst, 1e-5 * (1.0 + norm2(g)) - norm2(g_fd - g))
        checks.append(Check(f"{label}: gradient vs finite diff", worst, worst >= 0))

        worst = np.inf
        for x, y in zip(xs, ys):
            fx, fy = orc.value(x), orc.value(y)
            fm = orc.value(0.5 * (x + y))
            slack = 0.5 * (fx + fy) - fm + 1e-9 * (1.0 + abs(fx) + abs(fy))
            worst = min(worst, slack)
        checks.append(Check(f"{label}: midpoint convexity", worst, worst >= 0))

        worst = np.inf
        for x in xs:
            d = rng.normal(size=p.dimension)
            for _ in range(power_steps):
                nd = norm2(d)
                if nd == 0:
                    break
                d = d / nd
                gd = orc.gradient(x + d) - orc.gradient(x)
                ratio_slack = orc.lipschitz * (1 + 1e-9) - norm2(gd)
                worst = min(worst, ratio_slack)
                d = gd
        checks.append(Check(f"{label}: Lipschitz constant", worst, worst >= 0))

    gt = p.ground_truth
    if gt is not None:
        xs_ = gt.x_star
        m1 = 1e-10 * (1 + abs(gt.f_star)) - abs(p.f(xs_) - gt.f_star)
        checks.append(Check("ground truth: f(x*) = f*", m1, m1 >= 0))
        m2 = 1e-10 * (1 + abs(gt.h_bar_star)) - abs(p.h_bar(xs_) - gt.h_bar_star)
        checks.append(Check("ground truth: hbar(x*) = hbar*", m2, m2 >= 0))
    checks.append(Check("declared: lower argmin nonempty", 0.0, bool(p.lower_argmin_nonempty), "declared flag"))
    return ValidationReport(checks)
