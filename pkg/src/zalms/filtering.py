"""
Zero-attracting LMS
===================

LMS with an extra ``-rho sgn(w)`` term in the update that pulls every nonzero
coefficient toward zero (a subgradient step on ``lambda ||w||_1``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class AlgoParams:
    """
    Parameters
    ----------
    step_size: float
        LMS step size ``mu`` (> 0)
    reg_weight: float
        l1 weight ``lambda`` (>= 0); the attractor gain is ``rho = mu * lambda``
    """

    step_size: float
    reg_weight: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise DomainError("step size must be positive")
        if not (math.isfinite(self.reg_weight) and self.reg_weight >= 0):
            raise DomainError("regularization weight must be >= 0")

    @property
    def attractor_gain(self):
        return self.step_size * self.reg_weight


@dataclass(frozen=True)
class FilterState:
    w: np.ndarray
    n: int = 0

    @classmethod
    def zeros(cls, L):
        return cls(np.zeros(L))


def sgn(x):
    """Entrywise sign with ``sgn(0) = 0``."""
    return np.sign(x)


def za_lms_step(state, x, y, p):
    """
    One ZA-LMS iteration.

    ``w+ = w + mu e x - rho sgn(w)`` with the a-priori error ``e = y - w^T x``.

    Returns
    -------
    (FilterState, float)
        the updated state (``n`` incremented) and ``e``
    """
    w = np.asarray(state.w, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape != w.shape:
        raise DomainError(f"regressor shape {x.shape} does not match weights {w.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w)) and math.isfinite(y)):
        raise DomainError("non-finite input to za_lms_step")
    e = y - w @ x
    w_next = w + p.step_size * e * x
    rho = p.attractor_gain
    if rho:
        w_next = w_next - rho * sgn(w)
    return FilterState(w_next, state.n + 1), float(e)


def objective_value(w, plant, Rx, reg_weight):
    """
    Regularized cost ``E{(y - w^T x)^2} + lambda ||w||_1``.

    The expectation is evaluated in closed form as
    ``noise_var + (w - w_star)^T Rx (w - w_star)``.
    """
    w = np.asarray(w, dtype=float)
    Rx = np.asarray(Rx, dtype=float)
    if w.shape != plant.w_star.shape or Rx.shape != (w.size, w.size):
        raise DomainError("dimension mismatch in objective_value")
    wt = w - plant.w_star
    return plant.noise_var + float(wt @ Rx @ wt) + reg_weight * float(np.abs(w).sum())
