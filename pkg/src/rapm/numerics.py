"""Small dense linear-algebra kernel.

Vectors and matrices are plain float64 numpy arrays; the helpers here only
validate shapes/finiteness and add a deterministic power iteration for
gradient Lipschitz constants of least-squares terms.
"""

import numpy as np

__all__ = [
    "DimensionError",
    "ConvergenceError",
    "as_vector",
    "as_matrix",
    "matvec",
    "norm1",
    "norm2",
    "dot",
    "spectral_norm_sq",
]


class DimensionError(ValueError):
    """Raised when array shapes do not line up."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative estimate does not settle in time.

    The last estimate is kept on ``estimate``.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


def as_vector(x, name="x"):
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


def as_matrix(A, name="A"):
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def matvec(A, x):
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if A.ndim != 2 or x.ndim != 1 or A.shape[1] != x.shape[0]:
        raise DimensionError(
            f"cannot multiply matrix of shape {A.shape} with vector of length "
            f"{x.shape[0] if x.ndim == 1 else x.shape}"
        )
    return A @ x


def norm2(x):
    return float(np.sqrt(np.dot(x, x)))


def norm1(x):
    return float(np.sum(np.abs(x)))


def dot(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"dot of vectors with lengths {x.shape} and {y.shape}")
    return float(np.dot(x, y))


def spectral_norm_sq(A, tol=1e-10, max_iter=5000):
    """Largest eigenvalue of ``A.T @ A`` by power iteration.

    Starts from the normalized all-ones vector, so the result is a pure
    function of ``A``.  Stops once the Rayleigh quotient ``||A v||**2``
    changes by less than ``tol`` relative.  If the start vector happens to
    lie in the null space of ``A`` the iteration restarts once from
    ``(1, 2, ..., n)`` normalized.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations pass without meeting ``tol``.
    """
    A = as_matrix(A)
    if A.size == 0:
        raise DimensionError("spectral_norm_sq needs a nonempty matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = A.shape[1]
    starts = [np.ones(n), np.arange(1.0, n + 1.0)]
    for v in starts:
        v = v / norm2(v)
        lam = norm2(A @ v) ** 2
        if lam == 0.0:
            continue
        for _ in range(max_iter):
            w = A.T @ (A @ v)
            nw = norm2(w)
            if nw == 0.0:
                break
            v = w / nw
            new = norm2(A @ v) ** 2
            if abs(new - lam) <= tol * new:
                return new
            lam = new
        else:
            raise ConvergenceError(
                f"power iteration did not converge in {max_iter} iterations", lam
            )
    if not np.any(A):
        return 0.0
    # both deterministic starts annihilated by A; fall back to a dense solve
    return float(np.linalg.eigvalsh(A.T @ A)[-1])
