"""Problem instances.

* :func:`make_weak_sharp_box` -- linear lower level over the unit box, so
  the lower-level solution set is a face of the box with a closed-form
  weak-sharpness modulus and a closed-form bilevel solution.
* :func:`make_sparse_regression` -- least-squares lower level over an l1
  ball with a validation least-squares upper level, from seeded Gaussian
  data.
* :func:`load_regression_csv` -- the same structure from CSV files.

Random data comes from numpy's PCG64 bit generator (``np.random.default_rng``),
seeded with the integer ``seed``.
"""

import csv
import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError, as_matrix, as_vector, matvec, norm2, spectral_norm_sq
from .oracles import (
    Check,
    GroundTruth,
    ParameterError,
    ProblemSpec,
    ValidationReport,
    SmoothOracle,
    least_squares_oracle,
    linear_oracle,
)
from .prox import Box, L1Ball

__all__ = [
    "RegressionData",
    "make_weak_sharp_box",
    "random_weak_sharp_box",
    "verify_weak_sharpness",
    "make_sparse_regression",
    "regression_problem",
    "load_regression_csv",
    "write_regression_csv",
    "CSVFormatError",
]


@dataclass(frozen=True, eq=False)
class RegressionData:
    A_tr: np.ndarray
    b_tr: np.ndarray
    A_val: np.ndarray
    b_val: np.ndarray
    radius: float

    def __post_init__(self):
        if self.A_tr.shape[1] != self.A_val.shape[1]:
            raise DimensionError(
                f"A_tr has {self.A_tr.shape[1]} columns but A_val has {self.A_val.shape[1]}"
            )
        if self.b_tr.shape != (self.A_tr.shape[0],):
            raise DimensionError(f"b_tr has length {self.b_tr.size}, A_tr has {self.A_tr.shape[0]} rows")
        if self.b_val.shape != (self.A_val.shape[0],):
            raise DimensionError(f"b_val has length {self.b_val.size}, A_val has {self.A_val.shape[0]} rows")
        if not self.radius > 0:
            raise ParameterError(f"l1-ball radius must be positive, got {self.radius}")


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype=np.float64).tobytes())
    return h.hexdigest()[:12]


def _distance_sq_oracle(p):
    def value(x):
        r = x - p
        return 0.5 * float(r @ r)

    return SmoothOracle(value=value, gradient=lambda x: x - p, lipschitz=1.0)


def make_weak_sharp_box(n, c, p):
    """Bilevel instance with closed-form solution.

    Lower level ``h(x) = <c, x>`` over ``[0, 1]^n``; upper level
    ``f(x) = 0.5 ||x - p||**2``.  The lower solution set is
    ``{x in [0,1]^n : x_i = 0 where c_i > 0}``, with minimum 0 and
    weak-sharpness modulus ``min{c_i : c_i > 0}``.  The bilevel solution
    zeroes those coordinates and clamps ``p`` to ``[0, 1]`` elsewhere.
    """
    c = as_vector(c, "c")
    p = as_vector(p, "p")
    if c.size != n or p.size != n:
        raise DimensionError(f"n={n} but c has length {c.size} and p has length {p.size}")
    if np.any(c < 0):
        raise ParameterError("c must be componentwise nonnegative")
    active = c > 0
    if not np.any(active):
        raise ParameterError("c must have a positive entry (otherwise no weak-sharp modulus)")

    def project_lower(x):
        z = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
        z[active] = 0.0
        return z

    x_star = project_lower(p)
    r = x_star - p
    gt = GroundTruth(
        x_star=x_star,
        f_star=0.5 * float(r @ r),
        h_bar_star=0.0,
        grad_f_at_xstar_norm=norm2(r),
        dist_to_solution_set=lambda x: norm2(np.asarray(x) - x_star),
        dist_to_lower_set=lambda x: norm2(np.asarray(x) - project_lower(x)),
        project_lower_set=project_lower,
        alpha=float(np.min(c[active])),
    )
    return ProblemSpec(
        upper=_distance_sq_oracle(p),
        lower=linear_oracle(c),
        nonsmooth=Box.unit(n),
        dimension=n,
        ground_truth=gt,
        key=f"weak_sharp_box(n={n},{_digest(c, p)})",
        data={"c": c, "p": p},
    )


def random_weak_sharp_box(n, n_positive, seed):
    """Seeded weak-sharp box instance.

    ``n_positive`` entries of ``c`` (at random positions) are drawn from
    ``U[0.5, 2]``, the rest are 0; ``p`` is drawn from ``U[-0.5, 1.5]^n``
    so that some free coordinates are clamped.
    """
    if not 1 <= n_positive <= n:
        raise ParameterError("need 1 <= n_positive <= n")
    rng = np.random.default_rng(seed)
    c = np.zeros(n)
    idx = rng.choice(n, size=n_positive, replace=False)
    c[idx] = rng.uniform(0.5, 2.0, size=n_positive)
    p = rng.uniform(-0.5, 1.5, size=n)
    return make_weak_sharp_box(n, c, p)


def verify_weak_sharpness(p, n_samples=10_000, seed=0, alpha=None):
    """Sample feasible points and check ``hbar(x) - hbar* >= alpha dist(x, X_h)``.

    Besides the uniform samples over the box, the probes include the
    points ``e_i`` for each coordinate with ``c_i > 0``.  ``alpha``
    overrides the modulus stored in the ground truth.
    """
    gt = p.ground_truth
    if gt is None or gt.alpha is None:
        raise ParameterError("weak-sharpness check needs ground truth with alpha")
    a = gt.alpha if alpha is None else alpha
    box = p.nonsmooth
    rng = np.random.default_rng(seed)
    n = p.dimension
    pts = box.lo + rng.random((n_samples, n)) * (box.hi - box.lo)
    extra = [np.eye(n)[i] for i in range(n) if gt.dist_to_lower_set(np.eye(n)[i]) > 0]
    if extra:
        pts = np.vstack([pts, np.array(extra)])
    worst, worst_x = np.inf, None
    for x in pts:
        m = p.h_bar(x) - gt.h_bar_star - a * gt.dist_to_lower_set(x) + 1e-10
        if m < worst:
            worst, worst_x = m, x
    ok = worst >= 0
    return ValidationReport([Check("weak sharpness", worst, ok, f"worst at {worst_x}")])


def regression_problem(data, key=None, x_true=None):
    """Bilevel sparse regression: training loss over an l1 ball, validation loss on top."""
    L_h = spectral_norm_sq(data.A_tr)
    L_f = spectral_norm_sq(data.A_val)
    if key is None:
        key = f"regression({_digest(data.A_tr, data.b_tr, data.A_val, data.b_val)},r={data.radius!r})"
    extra = {"regression": data}
    if x_true is not None:
        extra["x_true"] = x_true
    return ProblemSpec(
        upper=least_squares_oracle(data.A_val, data.b_val, L_f),
        lower=least_squares_oracle(data.A_tr, data.b_tr, L_h),
        nonsmooth=L1Ball(data.radius),
        dimension=data.A_tr.shape[1],
        key=key,
        data=extra,
    )


def make_sparse_regression(m_tr, m_val, n, k_sparse, noise_sigma, radius, seed):
    """Seeded sparse regression instance.

    Draw order: ``A_tr``, ``A_val`` (standard normal), support of the
    planted vector, its signs, then training and validation noise.  The
    planted vector has ``k_sparse`` entries of magnitude
    ``radius / k_sparse`` so it lies on the boundary of the l1 ball.
    """
    for name, v in (("m_tr", m_tr), ("m_val", m_val), ("n", n), ("k_sparse", k_sparse)):
        if int(v) != v or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v}")
    if k_sparse > n:
        raise ParameterError(f"k_sparse={k_sparse} exceeds n={n}")
    if noise_sigma < 0:
        raise ParameterError("noise_sigma must be >= 0")
    if not radius > 0:
        raise ParameterError("radius must be positive")
    rng = np.random.default_rng(seed)
    A_tr = rng.standard_normal((m_tr, n))
    A_val = rng.standard_normal((m_val, n))
    support = rng.choice(n, size=k_sparse, replace=False)
    signs = rng.choice((-1.0, 1.0), size=k_sparse)
    x_true = np.zeros(n)
    x_true[support] = signs * (radius / k_sparse)
    b_tr = matvec(A_tr, x_true) + noise_sigma * rng.standard_normal(m_tr)
    b_val = matvec(A_val, x_true) + noise_sigma * rng.standard_normal(m_val)
    data = RegressionData(A_tr, b_tr, A_val, b_val, float(radius))
    key = f"sparse_regression({m_tr},{m_val},{n},{k_sparse},{noise_sigma!r},{radius!r},seed={seed})"
    return regression_problem(data, key=key, x_true=x_true)


class CSVFormatError(ValueError):
    """Malformed numeric CSV input; the message names file, row and column."""


def _read_csv(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    rows = []
    width = None
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for ccol, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CSVFormatError(f"{path}: row {r}, column {ccol}: non-numeric cell {cell!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise CSVFormatError(f"{path}: row {r} has {len(vals)} columns, expected {width}")
            rows.append(vals)
    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        r, ccol = np.argwhere(~np.isfinite(arr))[0] + 1
        raise CSVFormatError(f"{path}: row {r}, column {ccol}: non-finite value")
    return arr


def _read_vector(path):
    arr = _read_csv(path)
    if arr.shape[1] == 1:
        return arr[:, 0]
    if arr.shape[0] == 1:
        return arr[0]
    raise CSVFormatError(f"{path}: expected a single row or column, got shape {arr.shape}")


def load_regression_csv(path_A_tr, path_b_tr, path_A_val, path_b_val, radius):
    """Build the sparse-regression bilevel problem from plain CSV files.

    Files are comma separated, headerless, one matrix row per line; the
    vectors may be stored as one column or one row.
    """
    A_tr = as_matrix(_read_csv(path_A_tr), "A_tr")
    b_tr = _read_vector(path_b_tr)
    A_val = as_matrix(_read_csv(path_A_val), "A_val")
    b_val = _read_vector(path_b_val)
    return regression_problem(RegressionData(A_tr, b_tr, A_val, b_val, float(radius)))


def _write_rows(path, arr):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(arr):
            w.writerow([format(v, ".17g") for v in row])


def write_regression_csv(data, directory):
    """Write ``A_tr.csv``, ``b_tr.csv``, ``A_val.csv``, ``b_val.csv``; returns the four paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, arr in (
        ("A_tr", data.A_tr),
        ("b_tr", data.b_tr[:, None]),
        ("A_val", data.A_val),
        ("b_val", data.b_val[:, None]),
    ):
        path = os.path.join(directory, f"{name}.csv")
        _write_rows(path, arr)
        paths.append(path)
    return paths
