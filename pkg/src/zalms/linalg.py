"""Small dense matrix helpers for the moment recursions (numpy-backed)."""
import numpy as np
from scipy.linalg import toeplitz

from .errors import DomainError


def _square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"{name} must be square, got shape {a.shape}")
    return a


def ar1_correlation(L, coeff, signal_var):
    """
    Stationary correlation matrix of an AR(1) regressor window.

    ``[R]_ij = signal_var * coeff**|i - j|``.
    """
    if L < 1:
        raise DomainError("filter length must be >= 1")
    if not -1.0 < coeff < 1.0:
        raise DomainError(f"AR(1) coefficient {coeff} is not stationary")
    if not signal_var > 0:
        raise DomainError("signal variance must be positive")
    return signal_var * toeplitz(coeff ** np.arange(L, dtype=float))


def matmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[0]:
        raise DomainError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def trace_of_product(a, b):
    """``tr(A B)`` as ``sum_ij A_ij B_ji`` without forming the product."""
    a = _square(a)
    b = _square(b)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.sum(a * b.T))


def outer(u, v):
    return np.outer(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def symmetrize(a):
    a = _square(a)
    return 0.5 * (a + a.T)
