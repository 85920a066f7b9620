"""
Transient model of ZA-LMS
=========================

Coupled recursions for the weight-error mean ``m_n = E{w~_n}`` and second
moment ``K_n = E{w~_n w~_n^T}``:

    m_{n+1} = (I - mu R) m_n - rho E{sgn(w* + w~_n)}
    K_{n+1} = K_n + mu^2 s_z^2 R + mu^2 Q1 + rho^2 Q2 - mu (Q3 + Q3^T)
              - rho (Q4 + Q4^T) + mu rho (Q5 + Q5^T)

with ``Q1 = 2 R K R + tr(R K) R`` (Gaussian input), ``Q3 = K R``,
``Q5 = R Q4`` and the sign terms ``Q2 = E{sgn sgn^T}``, ``Q4 = E{w~ sgn^T}``
evaluated pair by pair from the Gaussian sign moments. The learning curves
follow as ``MSE = s_z^2 + EMSE`` with ``EMSE = tr(R K_n)``.

Two model kinds share the engine. ``exact`` evaluates every off-diagonal
entry of ``Q2`` with the joint sign moment; ``baseline`` replaces it by the
product of the two individual sign expectations.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gaussmath as gm
from .errors import MomentConsistencyError
from .linalg import symmetrize, trace_of_product


class ModelKind(str, enum.Enum):
    EXACT = "exact"
    BASELINE = "baseline"


class NonGaussianInputWarning(UserWarning):
    """The fourth-order input moment term assumes Gaussian regressors."""


@dataclass(frozen=True)
class TheoryState:
    m: np.ndarray
    K: np.ndarray
    n: int = 0

    @classmethod
    def initial(cls, w_star, w0=None):
        """State of a filter started deterministically at ``w0`` (zeros by default)."""
        w_star = np.asarray(w_star, dtype=float)
        w0 = np.zeros_like(w_star) if w0 is None else np.asarray(w0, dtype=float)
        m = w0 - w_star
        return cls(m, np.outer(m, m), 0)


@dataclass(frozen=True)
class CurvePoint:
    n: int
    mse: float
    emse: float
    m: np.ndarray


@dataclass
class _Moments:
    """Central moments of ``w~_n`` shared by every term of one iteration."""

    mean: np.ndarray     # w* + m, the mean of the weights themselves
    m: np.ndarray        # mean weight error
    var: np.ndarray      # marginal variances, round-off clamped
    cov: np.ndarray      # central covariance, PSD-clamped pairwise


def _moments(state, w_star):
    m = np.asarray(state.m, dtype=float)
    K = np.asarray(state.K, dtype=float)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(K))):
        raise MomentConsistencyError("moments are no longer finite (recursion diverged)",
                                     iteration=state.n)
    cov = K - np.outer(m, m)
    var = np.diag(cov).copy()
    if np.any(var < -gm.VAR_CLAMP):
        i = int(np.argmin(var))
        raise MomentConsistencyError(
            f"marginal variance of tap {i} is {var[i]:.3e}", iteration=state.n)
    var = np.maximum(var, 0.0)
    np.fill_diagonal(cov, var)

    scale = np.sqrt(np.outer(var, var))
    nondeg = scale > 0
    r = np.zeros_like(cov)
    np.divide(cov, scale, out=r, where=nondeg)
    if np.any(np.abs(r) > 1.0 + gm.CORR_CLAMP):
        i, j = np.unravel_index(np.argmax(np.abs(r)), r.shape)
        raise MomentConsistencyError(
            f"pair ({i}, {j}) covariance exceeds the PSD bound (r = {r[i, j]:.6g})",
            iteration=state.n)
    if np.any(~nondeg & (np.abs(cov) > gm.VAR_CLAMP)):
        raise MomentConsistencyError("nonzero covariance against a zero variance",
                                     iteration=state.n)
    cov = np.where(nondeg, np.clip(r, -1.0, 1.0) * scale, 0.0)
    return _Moments(np.asarray(w_star, dtype=float) + m, m, var, cov)


def marginal_of(state, i, w_star):
    """Gaussian model of weight ``i``: mean ``w*_i + m_i``, variance ``K_ii - m_i^2``."""
    mo = _moments(state, w_star)
    return gm.Gaussian1(mo.mean[i], mo.var[i])


def pair_of(state, i, j, w_star):
    """Joint Gaussian model of weights ``(i, j)``, ``i != j``."""
    if i == j:
        raise ValueError("pair_of needs two distinct taps")
    mo = _moments(state, w_star)
    return gm.Gaussian2(mo.mean[i], mo.mean[j], mo.var[i], mo.var[j], mo.cov[i, j])


def _sign_means(mo):
    return gm.sign_mean(mo.mean, mo.var)


def sign_mean_vector(state, w_star):
    """``E{sgn(w* + w~_n)}`` entrywise."""
    return _sign_means(_moments(state, w_star))


def q1(K, Rx):
    """Fourth-order input term ``2 R K R + tr(R K) R`` (zero-mean Gaussian input)."""
    RK = Rx @ K
    return 2.0 * RK @ Rx + trace_of_product(Rx, K) * Rx


def _q2(mo, kind):
    L = mo.mean.size
    if ModelKind(kind) is ModelKind.BASELINE:
        s = _sign_means(mo)
        out = np.outer(s, s)
    else:
        iu, ju = np.triu_indices(L, 1)
        vals = gm.sign_product(mo.mean[iu], mo.mean[ju], mo.var[iu], mo.var[ju], mo.cov[iu, ju])
        out = np.zeros((L, L))
        out[iu, ju] = vals
        out[ju, iu] = vals
    np.fill_diagonal(out, 1.0)
    return out


def q2(state, w_star, kind=ModelKind.EXACT):
    """``E{sgn(w) sgn(w)^T}``; unit diagonal, off-diagonals per model kind."""
    return _q2(_moments(state, w_star), kind)


def q3(K, Rx):
    return K @ Rx


def _q4(mo):
    # u = w~_i (no w* shift), v = w_j; the diagonal is the perfectly correlated pair
    return gm.cross_moment(mo.m[:, None], mo.mean[None, :],
                           mo.var[:, None], mo.var[None, :], mo.cov)


def q4(state, w_star):
    """``E{w~ sgn(w)^T}`` entry by entry from the cross moment ``E{u sgn v}``."""
    return _q4(_moments(state, w_star))


def q5(Q4, Rx):
    return Rx @ Q4


def _next_mean(state, mo, Rx, p):
    m = state.m
    out = m - p.step_size * (Rx @ m)
    rho = p.attractor_gain
    if rho:
        out = out - rho * _sign_means(mo)
    return out


def _next_K(state, mo, Rx, p, noise_var, kind):
    mu = p.step_size
    rho = p.attractor_gain
    K = state.K
    Q3 = q3(K, Rx)
    out = K + mu * mu * noise_var * Rx + mu * mu * q1(K, Rx)
    if rho:
        out = out + rho * rho * _q2(mo, kind)
    out = out - mu * (Q3 + Q3.T)
    if rho:
        Q4 = _q4(mo)
        Q5 = q5(Q4, Rx)
        out = out - rho * (Q4 + Q4.T) + mu * rho * (Q5 + Q5.T)
    return out


def step_mean(state, Rx, p, w_star):
    """``m_{n+1} = (I - mu R) m_n - rho E{sgn(w* + w~_n)}``."""
    mo = _moments(state, w_star) if p.attractor_gain else None
    return _next_mean(state, mo, Rx, p)


def step_K(state, Rx, p, plant, kind=ModelKind.EXACT):
    """Second-moment update assembled from the five ``Q`` terms, then symmetrized."""
    mo = _moments(state, plant.w_star) if p.attractor_gain else None
    return symmetrize(_next_K(state, mo, Rx, p, plant.noise_var, kind))


def advance(state, Rx, p, plant, kind=ModelKind.EXACT):
    """Advance ``(m, K)`` jointly; both updates read the time-``n`` moments."""
    mo = _moments(state, plant.w_star) if p.attractor_gain else None
    m_next = _next_mean(state, mo, Rx, p)
    K_raw = _next_K(state, mo, Rx, p, plant.noise_var, kind)
    return TheoryState(m_next, symmetrize(K_raw), state.n + 1), K_raw


@dataclass
class TheoryCurve:
    """Theoretical learning curves for iterations ``0 .. n_iters - 1``."""

    kind: ModelKind
    noise_var: float
    mse: np.ndarray
    emse: np.ndarray
    m: np.ndarray
    K_snapshots: dict = field(default_factory=dict)
    max_asymmetry: float = 0.0
    min_marginal_var: float = np.inf
    exact_input_model: bool = True

    @property
    def n(self):
        return np.arange(self.mse.size)

    def __len__(self):
        return self.mse.size

    def __iter__(self):
        for k in range(len(self)):
            yield CurvePoint(k, float(self.mse[k]), float(self.emse[k]), self.m[k])


def run_model(plant, input_model, p, kind=ModelKind.EXACT, n_iters=1000, *,
              w0=None, record_K=(), gaussian_input=True):
    """
    Iterate the transient model from a deterministic start.

    Parameters
    ----------
    plant: PlantSpec
    input_model: InputModel
        supplies the regressor correlation matrix
    p: AlgoParams
    kind: ModelKind
        ``exact`` or ``baseline``
    n_iters: int
        number of curve points (iterations ``0 .. n_iters - 1``)
    w0: array, optional
        initial weights, zeros by default
    record_K: iterable of int
        iterations at which ``K_n`` is kept in ``K_snapshots``
    gaussian_input: bool
        declare the regressor Gaussian; ``False`` keeps the computation but
        warns and flags the curve as not exact

    Returns
    -------
    TheoryCurve
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    kind = ModelKind(kind)
    if not gaussian_input:
        warnings.warn("input declared non-Gaussian: the Q1 closed form is only exact for "
                      "Gaussian regressors", NonGaussianInputWarning, stacklevel=2)
    L = plant.L
    Rx = input_model.correlation(L)
    record_K = set(record_K)
    state = TheoryState.initial(plant.w_star, w0)
    mse = np.empty(n_iters)
    emse = np.empty(n_iters)
    ms = np.empty((n_iters, L))
    snaps = {}
    max_asym = 0.0
    min_var = np.inf
    for k in range(n_iters):
        e = trace_of_product(Rx, state.K)
        emse[k] = e
        mse[k] = plant.noise_var + e
        ms[k] = state.m
        min_var = min(min_var, float(np.min(np.diag(state.K) - state.m ** 2)))
        if k in record_K:
            snaps[k] = state.K.copy()
        if k + 1 < n_iters:
            with np.errstate(over="ignore", invalid="ignore"):
                state, K_raw = advance(state, Rx, p, plant, kind)
            if not np.all(np.isfinite(state.K)):
                raise MomentConsistencyError("moments are no longer finite (recursion diverged)",
                                             iteration=state.n)
            # asymmetry of the raw update, before symmetrization hides it
            max_asym = max(max_asym, float(np.max(np.abs(K_raw - K_raw.T))))
    return TheoryCurve(kind, plant.noise_var, mse, emse, ms, snaps, max_asym, min_var,
                       exact_input_model=gaussian_input)
