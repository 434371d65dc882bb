"""Proximal maps and projections for the nonsmooth term.

Four kinds of term are supported: the zero function, a weighted l1 norm,
the indicator of an l1 ball and the indicator of a box.  Indicators take the
value ``inf`` off their set.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .numerics import norm1, norm2

__all__ = [
    "FEAS_TOL",
    "Zero",
    "L1Norm",
    "L1Ball",
    "Box",
    "prox",
    "project_l1_ball",
    "soft_threshold",
    "CertificateResult",
    "certify_prox",
    "probe_points",
]

# slack used when deciding whether a point lies in an indicator's set
FEAS_TOL = 1e-10


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"prox step gamma must be positive, got {gamma}")


def soft_threshold(u, thresh):
    """``sign(u) * max(|u| - thresh, 0)``, exactly zero when ``|u| <= thresh``."""
    u = np.asarray(u, dtype=np.float64)
    out = np.sign(u) * np.maximum(np.abs(u) - thresh, 0.0)
    out[np.abs(u) <= thresh] = 0.0
    return out


def project_l1_ball(u, radius):
    """Euclidean projection of ``u`` onto ``{z : ||z||_1 <= radius}``.

    Sort-and-threshold: find the unique ``theta`` with
    ``||soft_threshold(u, theta)||_1 == radius``.
    """
    if not radius > 0:
        raise ValueError(f"l1-ball radius must be positive, got {radius}")
    u = np.asarray(u, dtype=np.float64)
    a = np.abs(u)
    if a.sum() <= radius:
        return u.copy()
    s = np.sort(a)[::-1]
    css = np.cumsum(s)
    j = np.arange(1, s.size + 1)
    rho = np.nonzero(s * j > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return soft_threshold(u, theta)


@dataclass(frozen=True)
class Zero:
    def value(self, x):
        return 0.0

    def prox(self, u, gamma):
        _check_gamma(gamma)
        return np.array(u, dtype=np.float64)

    def contains(self, x):
        return True


@dataclass(frozen=True)
class L1Norm:
    """``weight * ||x||_1``."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"l1 weight must be >= 0, got {self.weight}")

    def value(self, x):
        return self.weight * norm1(x)

    def prox(self, u, gamma):
        _check_gamma(gamma)
        return soft_threshold(u, gamma * self.weight)

    def contains(self, x):
        return True


@dataclass(frozen=True)
class L1Ball:
    """Indicator of ``{x : ||x||_1 <= radius}``."""

    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"l1-ball radius must be positive, got {self.radius}")

    def contains(self, x):
        return norm1(x) <= self.radius + FEAS_TOL

    def value(self, x):
        return 0.0 if self.contains(x) else np.inf

    def prox(self, u, gamma):
        # projections do not depend on the step
        _check_gamma(gamma)
        return project_l1_ball(u, self.radius)


@dataclass(frozen=True, eq=False)
class Box:
    """Indicator of ``{x : lo <= x <= hi}`` (componentwise)."""

    lo: np.ndarray = field(repr=True)
    hi: np.ndarray = field(repr=True)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("box needs lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n):
        return cls(np.zeros(n), np.ones(n))

    def contains(self, x):
        x = np.asarray(x)
        return bool(np.all(x >= self.lo - FEAS_TOL) and np.all(x <= self.hi + FEAS_TOL))

    def value(self, x):
        return 0.0 if self.contains(x) else np.inf

    def prox(self, u, gamma):
        _check_gamma(gamma)
        return np.clip(np.asarray(u, dtype=np.float64), self.lo, self.hi)


def prox(op, u, gamma):
    """``argmin_z gamma * op(z) + 0.5 * ||z - u||**2``."""
    return op.prox(u, gamma)


@dataclass
class CertificateResult:
    passed: bool
    margin: float
    detail: str = ""


def probe_points(op, z, n_random=128, seed=0):
    """Feasible points used to test the projection variational inequality.

    l1 ball: the ``2n`` signed axis vertices.  Box: all ``2**n`` vertices
    when ``n <= 12``, otherwise ``n_random`` seeded uniform points.  The
    vertex maximizing ``<u - z, v>`` is appended by ``certify_prox``.
    """
    n = z.size
    if isinstance(op, L1Ball):
        eye = np.eye(n) * op.radius
        return np.vstack([eye, -eye])
    if isinstance(op, Box):
        if n <= 12:
            bits = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
            return op.lo + bits * (op.hi - op.lo)
        rng = np.random.default_rng(seed)
        return op.lo + rng.random((n_random, n)) * (op.hi - op.lo)
    raise TypeError(f"no probe set for {type(op).__name__}")


def _linear_maximizer(op, d):
    """Vertex of the feasible set maximizing ``<d, v>``."""
    if isinstance(op, L1Ball):
        v = np.zeros_like(d)
        i = int(np.argmax(np.abs(d)))
        v[i] = op.radius * (1.0 if d[i] >= 0 else -1.0)
        return v
    return np.where(d > 0, op.hi, op.lo)


def certify_prox(op, u, z, gamma, tol=1e-8):
    """Check that ``z`` is ``prox(op, u, gamma)`` via ``(u - z) / gamma in d op(z)``.

    The returned margin is the worst signed slack; it is ``>= -tol`` exactly
    when the certificate passes.
    """
    u = np.asarray(u, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if isinstance(op, Zero):
        g = (u - z) / gamma
        margin = 0.0 - float(np.max(np.abs(g), initial=0.0))
        return CertificateResult(margin >= -tol, margin, "zero subgradient")

    if isinstance(op, L1Norm):
        g = (u - z) / gamma
        at_zero = z == 0.0
        slack = np.where(
            at_zero,
            op.weight - np.abs(g),
            -np.abs(g - op.weight * np.sign(z)),
        )
        i = int(np.argmin(slack)) if slack.size else 0
        margin = float(slack[i]) if slack.size else 0.0
        return CertificateResult(margin >= -tol, margin, f"worst coordinate {i}")

    if isinstance(op, (L1Ball, Box)):
        if isinstance(op, L1Ball):
            infeas = norm1(z) - op.radius
        else:
            infeas = float(max(np.max(op.lo - z, initial=0.0), np.max(z - op.hi, initial=0.0)))
        if infeas > tol:
            return CertificateResult(False, -infeas, "point is infeasible")
        d = u - z
        probes = np.vstack([probe_points(op, z), _linear_maximizer(op, d)])
        diff = probes - z
        dist = np.linalg.norm(diff, axis=1)
        # probes within round-off of z make the normalized inequality ill-posed
        keep = dist > tol * (1.0 + norm2(z))
        if not np.any(keep):
            return CertificateResult(True, 0.0, "no distinct probe")
        viol = (diff[keep] @ d) / dist[keep]
        j = int(np.argmax(viol))
        margin = 0.0 - float(viol[j])
        return CertificateResult(margin >= -tol, margin, f"worst probe {probes[keep][j]}")

    raise TypeError(f"unknown proximal term {type(op).__name__}")
