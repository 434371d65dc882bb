"""Reference values, trace metrics, inequality certificates and rate estimates.

The certificates evaluate, along a recorded trace, the inequalities that
the convergence analysis of the regularized accelerated method proves in
exact arithmetic.  Margins are ``rhs - lhs`` style slacks divided by a
scale of the form ``1 + |quantity|``; a check passes when its worst margin
is ``>= -tol``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import norm2
from .oracles import F_eta_value, ParameterError, grad_f_eta, lipschitz_L_eta, q_map
from .solvers import MaxStep, _accelerated, fista_lower_solve, select_gamma

__all__ = [
    "Reference",
    "Inequality",
    "CertReport",
    "RateReport",
    "TraceError",
    "compute_reference",
    "evaluate_trace",
    "certify_lemma_chain",
    "certify_rate_envelopes",
    "certify_budget_bounds",
    "estimate_rate",
    "iteration_budget",
    "iterations_to_threshold",
    "write_trace_csv",
    "trace_csv_path",
    "TRACE_COLUMNS",
]

RATE_FLOOR = 1e-13


class TraceError(ValueError):
    """A trace is unsuitable for the requested evaluation."""


@dataclass
class Reference:
    f_star: float
    h_bar_star: float
    source: str
    problem_key: str
    budget: Optional[int] = None
    residual_f: Optional[float] = None
    residual_h: Optional[float] = None
    x_f: Optional[np.ndarray] = field(default=None, repr=False)

    def as_dict(self):
        return {
            "f_star": self.f_star,
            "h_bar_star": self.h_bar_star,
            "source": self.source,
            "budget": self.budget,
            "residual_f": self.residual_f,
            "residual_h": self.residual_h,
        }


@dataclass
class Inequality:
    name: str
    worst_margin: float
    worst_k: Optional[int]
    passed: bool
    applicable: bool = True
    note: str = ""


@dataclass
class CertReport:
    checks: list
    tol: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.applicable)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def table(self):
        lines = [f"{'inequality':<34} {'worst margin':>14} {'at k':>6}  status"]
        for c in self.checks:
            if not c.applicable:
                lines.append(f"{c.name:<34} {'-':>14} {'-':>6}  n/a ({c.note})")
                continue
            lines.append(
                f"{c.name:<34} {c.worst_margin:>14.6e} {str(c.worst_k):>6}  {'pass' if c.passed else 'FAIL'}"
            )
        return "\n".join(lines)


@dataclass
class RateReport:
    slope: float
    doubling_ratio: float
    window: tuple
    n_points: int


def _ineq(name, margins, ks, tol, note=""):
    margins = np.asarray(margins, dtype=np.float64)
    if margins.size == 0:
        return Inequality(name, 0.0, None, True, True, note or "vacuous")
    margins = np.where(np.isnan(margins), -np.inf, margins)
    i = int(np.argmin(margins))
    worst = float(margins[i])
    return Inequality(name, worst, int(ks[i]), worst >= -tol, True, note)


def _na(name, note):
    return Inequality(name, float("nan"), None, True, False, note)


def _effective_L(trace):
    # bounds proved with gamma <= 1/L_eta hold with 1/gamma in place of L_eta
    return 1.0 / trace.gamma


def compute_reference(p, budget, x0=None):
    """Optimal values ``f*`` and ``hbar*`` used by the suboptimality/infeasibility metrics.

    Closed form when the problem carries ground truth.  Otherwise ``hbar*``
    comes from a ``budget``-iteration accelerated solve of the lower level
    alone and ``f*`` from a ``budget``-iteration regularized run with
    ``eta = 1/(budget + 1)``; both record their final fixed-point residual.
    """
    if budget < 1:
        raise ParameterError("reference budget must be >= 1")
    gt = p.ground_truth
    if gt is not None:
        return Reference(gt.f_star, gt.h_bar_star, "closed_form", p.key, x_f=gt.x_star)
    x0 = np.zeros(p.dimension) if x0 is None else p.check_point(x0)
    low = fista_lower_solve(p, budget, x0, record_every=budget)
    xh = low.x_final
    g_h = low.gamma
    res_h = norm2(xh - p.nonsmooth.prox(xh - g_h * p.lower.gradient(xh), g_h))

    eta = 1.0 / (budget + 1)
    gamma = select_gamma(MaxStep(), lipschitz_L_eta(p, eta))
    run = _accelerated(p, budget, x0, lambda y: grad_f_eta(p, eta, y), eta, gamma, budget, "RAPM", 0)
    xf = run.x_final
    res_f = norm2(xf - q_map(p, eta, gamma, xf))
    return Reference(
        f_star=p.f(xf),
        h_bar_star=float(low.h_bar[-1]),
        source="long_run",
        problem_key=p.key,
        budget=budget,
        residual_f=res_f,
        residual_h=res_h,
        x_f=xf,
    )


def evaluate_trace(trace, ref, p=None):
    """Per-record metric series.

    Keys: ``k``, ``subopt`` = ``|f(x_k) - f*|``, ``infeas`` =
    ``hbar(x_k) - hbar*``, ``abs_infeas``, and ``dist`` (distance to the
    lower-level solution set) when ``p`` has closed-form ground truth.
    Traces with an averaged iterate also get ``subopt_avg`` and
    ``infeas_avg``.
    """
    if trace.problem_key != ref.problem_key:
        raise TraceError(f"trace is for {trace.problem_key!r} but reference is for {ref.problem_key!r}")
    out = {
        "k": trace.k.copy(),
        "subopt": np.abs(trace.f - ref.f_star),
        "infeas": trace.h_bar - ref.h_bar_star,
    }
    out["abs_infeas"] = np.abs(out["infeas"])
    if p is not None and p.ground_truth is not None:
        out["dist"] = np.array([p.ground_truth.dist_to_lower_set(x) for x in trace.x])
    if "x_avg" in trace.extra:
        ex = trace.extra
        out["subopt_avg"] = np.abs(ex["f_avg"] - ref.f_star)
        out["infeas_avg"] = ex["h_avg"] + ex["omega_avg"] - ref.h_bar_star
    return out


def _require_full(trace):
    if trace.K < 1 or trace.k.size != trace.K + 1 or not np.array_equal(trace.k, np.arange(trace.K + 1)):
        raise TraceError("certificate needs a trace recorded at every iteration (record_every=1)")


def comparison_point(p, trace, factor=4):
    """Ground-truth ``x*`` if known, else the end point of a longer run with the same eta and gamma."""
    if p.ground_truth is not None:
        return p.ground_truth.x_star
    K_ref = max(factor * trace.K, 200)
    eta, gamma = trace.eta, trace.gamma
    run = _accelerated(p, K_ref, trace.x[0], lambda y: grad_f_eta(p, eta, y), eta, gamma, K_ref, "RAPM", 0)
    return run.x_final


def certify_lemma_chain(trace, p, eta=None, x=None, tol=1e-8):
    """Certify the descent, recursion and ``O(1/k^2)`` inequalities along an R-APM trace.

    With ``L = 1/gamma``, ``v_k = F_eta(x_k) - F_eta(x)`` and
    ``u_k = t_k x_k - (t_k - 1) x_{k-1} - x``:

    * descent: ``F(z) - F(x_k) >= <y_k - z, x_k - y_k> L + L/2 ||x_k - y_k||^2``
      for ``z`` in ``{x, x_{k-1}}``, margin scaled by ``1 + |F(z)| + |F(x_k)|``;
    * recursion: ``(2/L)(t_k^2 v_k - t_{k+1}^2 v_{k+1}) >= ||u_{k+1}||^2 - ||u_k||^2``,
      scaled by ``1 + ||x||^2``;
    * bound: ``v_k <= 2 L ||x_0 - x||^2 / (k+1)^2``, scaled by ``1 + |F(x)|``.

    ``x`` defaults to :func:`comparison_point`.
    """
    _require_full(trace)
    eta = trace.eta if eta is None else eta
    if x is None:
        x = comparison_point(p, trace)
    L = _effective_L(trace)
    K = trace.K
    xs, ys, ts, Fs = trace.x, trace.y, trace.t, trace.F_eta
    Fx = F_eta_value(p, eta, x)
    ks = np.arange(1, K + 1)

    def descent(z, Fz, k):
        if np.isinf(Fs[k]) or np.isinf(Fz):
            return -np.inf if np.isinf(Fs[k]) else 0.0
        q, y = xs[k], ys[k]
        rhs = L * float((y - z) @ (q - y)) + 0.5 * L * float((q - y) @ (q - y))
        return ((Fz - Fs[k]) - rhs) / (1.0 + abs(Fz) + abs(Fs[k]))

    m2_ref = [descent(x, Fx, k) for k in ks]
    m2_prev = [descent(xs[k - 1], Fs[k - 1], k) for k in ks]

    v = Fs - Fx
    u = ts[:, None] * xs - (ts[:, None] - 1.0) * np.vstack([xs[:1], xs[:-1]]) - x
    usq = np.einsum("ij,ij->i", u, u)
    scale3 = 1.0 + float(x @ x)
    m3 = []
    for k in range(1, K):
        lhs = (2.0 / L) * (ts[k] ** 2 * v[k] - ts[k + 1] ** 2 * v[k + 1])
        m3.append((lhs - (usq[k + 1] - usq[k])) / scale3)

    d0 = float((xs[0] - x) @ (xs[0] - x))
    m4 = [(2.0 * L * d0 / (k + 1) ** 2 - v[k]) / (1.0 + abs(Fx)) for k in ks]

    checks = [
        _ineq("descent (vs comparison point)", m2_ref, ks, tol),
        _ineq("descent (vs previous iterate)", m2_prev, ks, tol),
        _ineq("momentum recursion", m3, ks[:-1], tol, "" if K > 1 else "vacuous for K=1"),
        _ineq("F_eta gap O(1/k^2) bound", m4, ks, tol),
    ]
    return CertReport(checks, tol)


def _eta_premise(eta, gt):
    g = gt.grad_f_at_xstar_norm
    if g == 0:
        return True
    return eta <= gt.alpha / (2.0 * g) * (1 + 1e-12)


def certify_rate_envelopes(trace, p, eta=None, tol=1e-9):
    """Certify the suboptimality and infeasibility envelopes at every recorded ``k >= 1``.

    With ``L = 1/gamma``, ``d = dist(x_0, X*)``:

    * suboptimality upper bound ``f(x_k) - f* <= 2 L d^2 / (eta (k+1)^2)``;
    * infeasibility ``0 <= hbar(x_k) - hbar* <= 4 L d^2 / (k+1)^2`` and
      ``dist(x_k, X_h) <= 4 L d^2 / (alpha (k+1)^2)``;
    * suboptimality lower bound
      ``f(x_k) - f* >= -||grad f(x*)|| 4 L d^2 / (alpha (k+1)^2)``.

    The last two groups need weak sharpness and
    ``eta <= alpha / (2 ||grad f(x*)||)``; otherwise they are reported as
    not applicable.
    """
    gt = p.ground_truth
    if gt is None:
        raise ParameterError("rate envelopes need closed-form ground truth")
    eta = trace.eta if eta is None else eta
    L = _effective_L(trace)
    sel = trace.k >= 1
    ks = trace.k[sel]
    f = trace.f[sel]
    hb = trace.h_bar[sel]
    d2 = gt.dist_to_solution_set(trace.x[0]) ** 2
    k1 = (ks + 1.0) ** 2
    sf = 1.0 + abs(gt.f_star)
    sh = 1.0 + abs(gt.h_bar_star)

    checks = [_ineq("suboptimality upper bound", (2 * L * d2 / (eta * k1) - (f - gt.f_star)) / sf, ks, tol)]
    names = ("infeasibility lower bound", "infeasibility upper bound", "distance bound", "suboptimality lower bound")
    if gt.alpha is None:
        checks += [_na(n, "no weak-sharpness modulus") for n in names]
    elif not _eta_premise(eta, gt):
        checks += [_na(n, f"eta={eta:.6g} above alpha/(2||grad f(x*)||)") for n in names]
    else:
        env = 4 * L * d2 / k1
        dist = np.array([gt.dist_to_lower_set(z) for z in trace.x[sel]])
        checks += [
            _ineq(names[0], (hb - gt.h_bar_star) / sh, ks, tol),
            _ineq(names[1], (env - (hb - gt.h_bar_star)) / sh, ks, tol),
            _ineq(names[2], env / gt.alpha - dist, ks, tol),
            _ineq(names[3], ((f - gt.f_star) + gt.grad_f_at_xstar_norm * env / gt.alpha) / sf, ks, tol),
        ]
    return CertReport(checks, tol)


def certify_budget_bounds(trace, p, tol=1e-9):
    """Certify the budget-scaled (``eta = 1/(K+1)``) bounds at the final iterate.

    * ``f(x_K) - f* <= 2 L_f d^2/(K+1)^2 + 2 L_h d^2/(K+1)`` with
      ``d = dist(x_0, X*)``;
    * ``hbar(x_K) - hbar* <= 2 L_f e^2/(K+1)^3 + 2 L_h e^2/(K+1)^2 + D_f/(K+1)``
      with ``e = dist(x_0, X_h)`` and
      ``D_f = max_k f(P(x_0)) - f(x_k)`` over the recorded ``k >= 1``
      (``P`` the projection onto the lower-level solution set).

    With a step below ``1/L_eta`` the constants use ``1/gamma`` in place of
    ``L_h + eta L_f``.  Both checks need closed-form ground truth and are
    reported as not applicable otherwise.
    """
    K = trace.K
    eta = trace.eta
    if abs(eta * (K + 1) - 1.0) > 1e-12:
        raise ParameterError(f"trace eta={eta} is not 1/(K+1) for K={K}")
    gt = p.ground_truth
    names = ("budget-scaled suboptimality bound", "budget-scaled infeasibility bound")
    if gt is None:
        return CertReport([_na(n, "no closed-form ground truth") for n in names], tol)
    L_h, L_f = p.lower.lipschitz, p.upper.lipschitz
    L_eta = lipschitz_L_eta(p, eta)
    x0 = trace.x[0]
    fK = trace.f[-1]
    hK = trace.h_bar[-1]
    d2 = gt.dist_to_solution_set(x0) ** 2
    if abs(trace.gamma * L_eta - 1.0) <= 1e-12:
        b1 = 2 * L_f * d2 / (K + 1) ** 2 + 2 * L_h * d2 / (K + 1)
        c_h, c_f = L_h, L_f
    else:
        Le = _effective_L(trace)
        b1 = 2 * Le * d2 / (eta * (K + 1) ** 2)
        c_h, c_f = Le, 0.0
    checks = [_ineq(names[0], [(b1 - (fK - gt.f_star)) / (1 + abs(gt.f_star))], [K], tol)]
    if gt.project_lower_set is None:
        checks.append(_na(names[1], "no projection onto the lower-level set"))
    else:
        px0 = gt.project_lower_set(x0)
        e2 = gt.dist_to_lower_set(x0) ** 2
        D_f = float(np.max(p.f(px0) - trace.f[trace.k >= 1]))
        b2 = 2 * c_f * e2 / (K + 1) ** 3 + 2 * c_h * e2 / (K + 1) ** 2 + D_f / (K + 1)
        checks.append(
            _ineq(names[1], [(b2 - (hK - gt.h_bar_star)) / (1 + abs(gt.h_bar_star))], [K], tol, f"D_f={D_f:.6g}")
        )
    return CertReport(checks, tol)


def estimate_rate(ks, errors, tail_fraction=0.5):
    """Least-squares slope of ``log(error)`` against ``log(k)`` over the tail.

    The tail is the last ``tail_fraction`` of the records with ``k >= 1``;
    entries at or below ``1e-13`` are dropped as round-off.  The doubling
    ratio is ``error(k_half) / error(k_end)`` with ``k_end`` the last
    usable record and ``k_half`` the record closest to ``k_end / 2``.
    """
    ks = np.asarray(ks, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if not 0 < tail_fraction <= 1:
        raise ParameterError("tail_fraction must lie in (0, 1]")
    pos = ks >= 1
    ks, errors = ks[pos], errors[pos]
    n_tail = max(1, int(math.ceil(tail_fraction * ks.size)))
    kt, et = ks[-n_tail:], errors[-n_tail:]
    ok = np.isfinite(et) & (et > RATE_FLOOR)
    if ok.sum() < 5:
        raise TraceError(f"only {int(ok.sum())} usable tail points (need 5) above the {RATE_FLOOR:g} floor")
    kt, et = kt[ok], et[ok]
    slope = float(np.polyfit(np.log(kt), np.log(et), 1)[0])
    good = np.isfinite(errors) & (errors > RATE_FLOOR)
    k_end = ks[good][-1]
    j = int(np.argmin(np.abs(ks - k_end / 2.0)))
    e_end = errors[good][-1]
    ratio = float(errors[j] / e_end) if errors[j] > RATE_FLOOR else float("nan")
    return RateReport(slope, ratio, (float(kt[0]), float(kt[-1])), int(kt.size))


def iteration_budget(eps, L_h, L_f, eta, dist0, metric="suboptimality"):
    """Smallest ``K`` meeting the iteration-complexity formula for accuracy ``eps``.

    ``suboptimality``: ``K >= sqrt(2 (L_h/eta + L_f)) dist0 / sqrt(eps) - 1``;
    ``infeasibility``: ``K >= 2 sqrt(L_h + eta L_f) dist0 / sqrt(eps) - 1``.
    """
    if not (eps > 0 and eta > 0 and dist0 > 0 and L_h >= 0 and L_f >= 0):
        raise ParameterError("need eps, eta, dist0 > 0 and L_h, L_f >= 0")
    if metric == "suboptimality":
        rhs = math.sqrt(2.0 * (L_h / eta + L_f)) * dist0 / math.sqrt(eps) - 1.0
    elif metric == "infeasibility":
        rhs = 2.0 * math.sqrt(L_h + eta * L_f) * dist0 / math.sqrt(eps) - 1.0
    else:
        raise ParameterError(f"unknown metric {metric!r}")
    # absorb round-off in the closed form before taking the ceiling
    rhs -= 1e-12 * (1.0 + abs(rhs))
    return max(0, int(math.ceil(rhs)))


def iterations_to_threshold(ks, errors, threshold):
    """First recorded ``k`` from which the error stays ``<= threshold``; ``None`` if never."""
    errors = np.asarray(errors)
    above = np.nonzero(~(errors <= threshold))[0]
    if above.size == 0:
        return int(ks[0])
    last = above[-1]
    if last + 1 >= len(ks):
        return None
    return int(ks[last + 1])


TRACE_COLUMNS = ("k", "f", "h", "omega", "F_eta", "subopt", "infeas", "dist", "elapsed_seconds")


def _fmt(v):
    return format(float(v), ".17g")


def trace_csv_path(prefix, variant):
    return f"{prefix}{variant}.csv"


def write_trace_csv(trace, series, path, include_timing=True):
    """Write one row per record: ``k, f, h, omega, F_eta, subopt, infeas[, dist][, elapsed_seconds]``.

    Reals use 17 significant digits so they parse back bit-exactly.  The
    ``dist`` column is present only when the series has it.
    """
    cols = ["k", "f", "h", "omega", "F_eta", "subopt", "infeas"]
    has_dist = series is not None and "dist" in series
    if has_dist:
        cols.append("dist")
    if include_timing:
        cols.append("elapsed_seconds")
    n = len(trace)
    nan = np.full(n, np.nan)
    data = {
        "f": trace.f,
        "h": trace.h,
        "omega": trace.omega,
        "F_eta": trace.F_eta,
        "subopt": series["subopt"] if series is not None else nan,
        "infeas": series["infeas"] if series is not None else nan,
        "dist": series["dist"] if has_dist else nan,
        "elapsed_seconds": trace.elapsed,
    }
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for i in range(n):
                row = [str(int(trace.k[i]))] + [_fmt(data[c][i]) for c in cols[1:]]
                fh.write(",".join(row) + "\n")
    except OSError as e:
        raise OSError(f"cannot write trace CSV {path}: {e.strerror or e}") from e
    return path
