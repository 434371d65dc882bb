"""Regularized accelerated proximal method and baselines.

All solvers run a fixed budget of ``K`` iterations and return an
:class:`IterateTrace`.  Record ``k = 0`` holds the start point.  For the
accelerated methods the stored ``t`` at ``k = 0`` is ``0``, the value that
makes the momentum recursion produce ``t_1 = 1``.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import norm2
from .oracles import ParameterError, grad_f_eta, lipschitz_L_eta, max_step, q_map

__all__ = [
    "DivergenceError",
    "Fixed",
    "BudgetScaled",
    "WeakSharp",
    "MaxStep",
    "Scaled",
    "SolverConfig",
    "IterateTrace",
    "VARIANTS",
    "momentum_next",
    "select_eta",
    "select_gamma",
    "rapm_solve",
    "rpm_solve",
    "fista_lower_solve",
    "bigsam_solve",
    "airg_solve",
    "solve",
    "replay_rapm",
]

DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    """An iterate became non-finite or exploded.

    ``last_k`` is the last iteration with a finite iterate and ``trace``
    the partial trace up to it.
    """

    def __init__(self, message, last_k, trace=None):
        super().__init__(message)
        self.last_k = last_k
        self.trace = trace


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ParameterError(f"fixed eta must be positive, got {self.value}")


@dataclass(frozen=True)
class BudgetScaled:
    """``eta = 1 / (K + 1)``."""


@dataclass(frozen=True)
class WeakSharp:
    """``eta = alpha / (2 ||grad f(x*)||)`` from ground truth."""


@dataclass(frozen=True)
class MaxStep:
    """``gamma = 1 / L_eta``."""


@dataclass(frozen=True)
class Scaled:
    fraction: float

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ParameterError(f"step fraction must lie in (0, 1], got {self.fraction}")


VARIANTS = ("RAPM", "RPM", "BiGSAM", "aIRG", "FISTALower")


@dataclass
class SolverConfig:
    variant: str = "RAPM"
    K: int = 100
    eta_mode: object = field(default_factory=BudgetScaled)
    gamma_rule: object = field(default_factory=MaxStep)
    x0: Optional[np.ndarray] = None
    record_every: int = 1
    seed: int = 0
    # a-IRG initial regularization weight
    eta0: float = 1.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"iteration budget K must be an integer >= 1, got {self.K}")
        self.K = int(self.K)
        if self.record_every < 1:
            raise ParameterError("record_every must be >= 1")


@dataclass
class IterateTrace:
    k: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    f: np.ndarray
    h: np.ndarray
    omega: np.ndarray
    F_eta: np.ndarray
    elapsed: np.ndarray
    variant: str
    eta: float
    gamma: float
    K: int
    seed: int = 0
    problem_key: str = ""
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.k.size

    @property
    def x_final(self):
        return self.x[-1]

    @property
    def h_bar(self):
        return self.h + self.omega

    def metadata(self):
        return {
            "variant": self.variant,
            "eta": self.eta,
            "gamma": self.gamma,
            "K": self.K,
            "seed": self.seed,
            "problem": self.problem_key,
        }


class _Recorder:
    def __init__(self, p, eta, K, record_every):
        self.p = p
        self.eta = eta
        self.K = K
        self.every = record_every
        self.rows = []
        self.t0 = time.perf_counter()

    def wants(self, k):
        return k == 0 or k == self.K or k % self.every == 0

    def add(self, k, x, y, t):
        p = self.p
        fx, hx, wx = p.f(x), p.h(x), p.omega(x)
        Fx = np.inf if np.isinf(wx) else hx + self.eta * fx + wx
        self.rows.append((k, x.copy(), y.copy(), t, fx, hx, wx, Fx, time.perf_counter() - self.t0))

    def trace(self, variant, gamma, seed, extra=None):
        cols = list(zip(*self.rows)) if self.rows else [()] * 9
        n = self.p.dimension
        return IterateTrace(
            k=np.array(cols[0], dtype=np.int64),
            x=np.array(cols[1]).reshape(-1, n),
            y=np.array(cols[2]).reshape(-1, n),
            t=np.array(cols[3], dtype=np.float64),
            f=np.array(cols[4], dtype=np.float64),
            h=np.array(cols[5], dtype=np.float64),
            omega=np.array(cols[6], dtype=np.float64),
            F_eta=np.array(cols[7], dtype=np.float64),
            elapsed=np.array(cols[8], dtype=np.float64),
            variant=variant,
            eta=self.eta,
            gamma=gamma,
            K=self.K,
            seed=seed,
            problem_key=self.p.key,
            extra=extra or {},
        )


def _guard(x, k, rec, variant, gamma, seed):
    if not np.all(np.isfinite(x)) or norm2(x) > DIVERGENCE_NORM:
        raise DivergenceError(
            f"{variant} diverged at iteration {k} (last finite iterate k={k - 1})",
            k - 1,
            rec.trace(variant, gamma, seed),
        )


def momentum_next(t):
    """``0.5 + sqrt(0.25 + t**2)``, so that ``t_next**2 - t_next == t**2``."""
    if not t >= 1:
        raise ParameterError(f"momentum parameter must be >= 1, got {t}")
    return 0.5 + math.sqrt(0.25 + t * t)


def select_eta(mode, K, ground_truth=None):
    """Regularization weight for a budget ``K``.

    With :class:`WeakSharp` and a vanishing ``||grad f(x*)||`` the
    threshold is infinite; the weight is then
    ``alpha / (2 * max(||grad f(x*)||, 1e-12))`` capped at 1.
    """
    if isinstance(mode, Fixed):
        return float(mode.value)
    if isinstance(mode, BudgetScaled):
        return 1.0 / (K + 1)
    if isinstance(mode, WeakSharp):
        gt = ground_truth
        if gt is None or gt.alpha is None:
            raise ParameterError("weak-sharp eta needs ground truth with alpha and ||grad f(x*)||")
        g = gt.grad_f_at_xstar_norm
        if g > 0:
            return gt.alpha / (2.0 * g)
        return min(gt.alpha / (2.0 * max(g, 1e-12)), 1.0)
    raise ParameterError(f"unknown eta mode {mode!r}")


def select_gamma(rule, L):
    bound = max_step(L)
    if math.isinf(bound):
        # no curvature at all; any step is admissible
        bound = 1.0
    if isinstance(rule, MaxStep):
        return bound
    if isinstance(rule, Scaled):
        return rule.fraction * bound
    raise ParameterError(f"unknown step rule {rule!r}")


def _start(p, cfg):
    x0 = np.zeros(p.dimension) if cfg.x0 is None else p.check_point(cfg.x0).copy()
    return x0


def _eta_gamma(p, cfg):
    eta = select_eta(cfg.eta_mode, cfg.K, p.ground_truth)
    L = lipschitz_L_eta(p, eta)
    gamma = select_gamma(cfg.gamma_rule, L)
    if gamma > max_step(L) * (1 + 1e-12):
        raise ParameterError(f"step gamma={gamma} exceeds 1/L_eta={max_step(L)}")
    return eta, gamma


def _accelerated(p, K, x0, grad, eta, gamma, record_every, variant, seed):
    rec = _Recorder(p, eta, K, record_every)
    prox = p.nonsmooth.prox
    rec.add(0, x0, x0, 0.0)
    x_prev = x0
    y = x0.copy()
    t = 1.0
    for k in range(1, K + 1):
        x = prox(y - gamma * grad(y), gamma)
        _guard(x, k, rec, variant, gamma, seed)
        if rec.wants(k):
            rec.add(k, x, y, t)
        t_next = momentum_next(t)
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev = x
        t = t_next
    return rec.trace(variant, gamma, seed)


def rapm_solve(p, cfg):
    """Run the regularized accelerated proximal method.

    ``y_1 = x_0``, ``t_1 = 1``; for ``k = 1..K``::

        x_k     = prox_{gamma omega}(y_k - gamma (grad h(y_k) + eta grad f(y_k)))
        t_{k+1} = 0.5 + sqrt(0.25 + t_k**2)
        y_{k+1} = x_k + ((t_k - 1) / t_{k+1}) (x_k - x_{k-1})
    """
    eta, gamma = _eta_gamma(p, cfg)
    x0 = _start(p, cfg)
    return _accelerated(
        p, cfg.K, x0, lambda y: grad_f_eta(p, eta, y), eta, gamma, cfg.record_every, "RAPM", cfg.seed
    )


def rpm_solve(p, cfg):
    """Same regularized map without momentum: ``x_{k+1} = q(x_k)``."""
    eta, gamma = _eta_gamma(p, cfg)
    x = _start(p, cfg)
    rec = _Recorder(p, eta, cfg.K, cfg.record_every)
    prox = p.nonsmooth.prox
    rec.add(0, x, x, 1.0)
    for k in range(1, cfg.K + 1):
        y = x
        x = prox(y - gamma * grad_f_eta(p, eta, y), gamma)
        _guard(x, k, rec, "RPM", gamma, cfg.seed)
        if rec.wants(k):
            rec.add(k, x, y, 1.0)
    return rec.trace("RPM", gamma, cfg.seed)


def fista_lower_solve(p, K, x0=None, record_every=1):
    """Plain accelerated proximal gradient on the lower level ``h + omega``.

    Uses ``gamma = 1/L_h``, or ``gamma = 1`` when ``h`` is affine
    (``L_h = 0``).  The recorded ``F_eta`` column is ``hbar``.
    """
    if K < 1:
        raise ParameterError("K must be >= 1")
    x0 = np.zeros(p.dimension) if x0 is None else p.check_point(x0).copy()
    gamma = select_gamma(MaxStep(), p.lower.lipschitz)
    rec_eta = 0.0
    tr = _accelerated(p, K, x0, p.lower.gradient, rec_eta, gamma, record_every, "FISTALower", 0)
    return tr


def bigsam_solve(p, cfg):
    """Sequential averaging: mix a lower-level prox-gradient step with an upper gradient step.

    ``u_k = prox(x_k - g_h grad h(x_k))``, ``v_k = x_k - g_f grad f(x_k)``,
    ``x_{k+1} = a_k v_k + (1 - a_k) u_k`` with ``a_k = min(1, 2/(k+1))``.
    A zero Lipschitz constant gets unit step.  Recorded ``F_eta`` is
    ``hbar`` (no regularization weight in this method).
    """
    x = _start(p, cfg)
    g_h = select_gamma(MaxStep(), p.lower.lipschitz)
    g_f = select_gamma(MaxStep(), p.upper.lipschitz)
    rec = _Recorder(p, 0.0, cfg.K, cfg.record_every)
    prox = p.nonsmooth.prox
    rec.add(0, x, x, 1.0)
    for k in range(1, cfg.K + 1):
        u = prox(x - g_h * p.lower.gradient(x), g_h)
        v = x - g_f * p.upper.gradient(x)
        a = min(1.0, 2.0 / (k + 1))
        y = x
        x = a * v + (1.0 - a) * u
        _guard(x, k, rec, "BiGSAM", g_h, cfg.seed)
        if rec.wants(k):
            rec.add(k, x, y, 1.0)
    tr = rec.trace("BiGSAM", g_h, cfg.seed, extra={"gamma_f": g_f})
    tr.eta = float("nan")
    return tr


def airg_solve(p, cfg):
    """Iteratively regularized proximal gradient with diminishing weights.

    ``gamma_k = gamma_0 / sqrt(k + 1)``, ``eta_k = eta_0 / (k + 1)**0.25``,
    ``gamma_0 = 1 / (L_h + eta_0 L_f)``.  Besides the last iterate, the
    gamma-weighted running average is kept in ``extra["x_avg"]`` (one row
    per record) with its ``f``/``h``/``omega`` values.
    """
    eta0 = cfg.eta0
    if not eta0 > 0:
        raise ParameterError("eta0 must be positive")
    gamma0 = select_gamma(MaxStep(), p.lower.lipschitz + eta0 * p.upper.lipschitz)
    x = _start(p, cfg)
    rec = _Recorder(p, eta0, cfg.K, cfg.record_every)
    prox = p.nonsmooth.prox
    rec.add(0, x, x, 1.0)
    avg_rows = [x.copy()]
    x_sum = np.zeros_like(x)
    w_sum = 0.0
    for k in range(0, cfg.K):
        g = gamma0 / math.sqrt(k + 1)
        e = eta0 / (k + 1) ** 0.25
        y = x
        x = prox(y - g * (p.lower.gradient(y) + e * p.upper.gradient(y)), g)
        _guard(x, k + 1, rec, "aIRG", gamma0, cfg.seed)
        x_sum += g * x
        w_sum += g
        if rec.wants(k + 1):
            rec.add(k + 1, x, y, 1.0)
            avg_rows.append(x_sum / w_sum)
    x_avg = np.array(avg_rows)
    extra = {
        "x_avg": x_avg,
        "f_avg": np.array([p.f(z) for z in x_avg]),
        "h_avg": np.array([p.h(z) for z in x_avg]),
        "omega_avg": np.array([p.omega(z) for z in x_avg]),
        "eta0": eta0,
        "gamma0": gamma0,
    }
    return rec.trace("aIRG", gamma0, cfg.seed, extra=extra)


def solve(p, cfg):
    """Dispatch on ``cfg.variant``."""
    if cfg.variant == "RAPM":
        return rapm_solve(p, cfg)
    if cfg.variant == "RPM":
        return rpm_solve(p, cfg)
    if cfg.variant == "BiGSAM":
        return bigsam_solve(p, cfg)
    if cfg.variant == "aIRG":
        return airg_solve(p, cfg)
    if cfg.variant == "FISTALower":
        return fista_lower_solve(p, cfg.K, cfg.x0, cfg.record_every)
    raise ParameterError(f"unknown variant {cfg.variant!r}")


def replay_rapm(p, trace):
    """Recompute the iterates of a fully recorded R-APM trace step by step.

    Used to check that a stored trace is exactly what the algorithm
    produces.  Returns ``(xs, ts)`` for ``k = 1..K``.
    """
    eta, gamma = trace.eta, trace.gamma
    x_prev = trace.x[0]
    y = x_prev.copy()
    t = 1.0
    xs, ts = [], []
    for _ in range(trace.K):
        x = q_map(p, eta, gamma, y)
        xs.append(x)
        ts.append(t)
        t_next = momentum_next(t)
        y = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev, t = x, t_next
    return np.array(xs), np.array(ts)
