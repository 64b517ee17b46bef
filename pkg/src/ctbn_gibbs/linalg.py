"""Dense matrix exponential and distribution propagation."""
import numpy as np

from . import kernels


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def matrix_exponential(A, t=1.0):
    """exp(t A) by scaling and squaring with a Pade approximant.

    No stochasticity is assumed, so sub-generators (rows summing to a
    negative number) are handled the same way as rate matrices.
    """
    A = _as_square(A)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"t must be a finite nonnegative time, got {t}")
    if A.shape[0] == 0:
        return A.copy()
    return kernels.expm(np.ascontiguousarray(t * A))


def propagate_distribution(Q, p0, t):
    """Solve the master equation: returns p(t) = exp(tQ)^T p0, clamped at 0."""
    Q = _as_square(Q, "Q")
    p0 = np.asarray(p0, dtype=np.float64)
    if p0.shape != (Q.shape[0],):
        raise ValueError(f"p0 has shape {p0.shape}, Q is {Q.shape}")
    p = matrix_exponential(Q, t).T @ p0
    p[p < 0] = 0.0
    return p

