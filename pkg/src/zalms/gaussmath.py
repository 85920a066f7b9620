"""
Gaussian sign moments
=====================

Closed forms for the expectations that make the zero-attracting LMS model
nonlinear:

* ``E{sgn u}`` for a scalar Gaussian ``u``,
* ``E{sgn u sgn v}`` for a jointly Gaussian pair, through four bivariate
  normal orthant probabilities,
* ``E{u sgn v}`` for a jointly Gaussian pair, through the precision-matrix
  decomposition of the pair density.

Every public function has a vectorised twin (``sign_mean``, ``sign_product``,
``cross_moment``) that accepts broadcastable arrays; the transient-model
engine calls those once per iteration for all tap pairs.

The convention ``sgn(0) = 0`` is used throughout, so a deterministic zero has
zero sign expectation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

VAR_CLAMP = 1e-12
CORR_CLAMP = 1e-10
# |r| above this is evaluated with the analytic perfect-correlation limit
PERFECT_CORR = 1.0 - 1e-12
# 1 - r^2 below this routes E{u sgn v} through the singular-safe closed form
SINGULAR_DET = 1e-6
# standardised arguments are clipped here; the normal tail beyond is < 1e-500
_Z_CLIP = 50.0

_TWO_PI = 2.0 * math.pi
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class Gaussian1:
    """Scalar Gaussian ``N(mean, variance)``; ``variance == 0`` is a point mass."""

    mean: float
    variance: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise DomainError("Gaussian1 parameters must be finite")
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", clean_variance(self.variance))


@dataclass(frozen=True)
class Gaussian2:
    """Jointly Gaussian pair ``(u, v)`` given by means, variances and covariance."""

    mean_u: float
    mean_v: float
    var_u: float
    var_v: float
    cov_uv: float

    def __post_init__(self):
        vals = (self.mean_u, self.mean_v, self.var_u, self.var_v, self.cov_uv)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("Gaussian2 parameters must be finite")
        object.__setattr__(self, "mean_u", float(self.mean_u))
        object.__setattr__(self, "mean_v", float(self.mean_v))
        var_u = clean_variance(self.var_u)
        var_v = clean_variance(self.var_v)
        object.__setattr__(self, "var_u", var_u)
        object.__setattr__(self, "var_v", var_v)
        # validates the PSD condition, raising when violated beyond tolerance
        r = float(correlation(var_u, var_v, self.cov_uv))
        if var_u > 0 and var_v > 0:
            cov = r * math.sqrt(var_u * var_v) if abs(r) == 1.0 else float(self.cov_uv)
            object.__setattr__(self, "cov_uv", cov)
        else:
            object.__setattr__(self, "cov_uv", 0.0)

    @property
    def correlation(self):
        return float(correlation(self.var_u, self.var_v, self.cov_uv))

    def swapped(self):
        return Gaussian2(self.mean_v, self.mean_u, self.var_v, self.var_u, self.cov_uv)

    def marginal_u(self):
        return Gaussian1(self.mean_u, self.var_u)

    def marginal_v(self):
        return Gaussian1(self.mean_v, self.var_v)


def clean_variance(var):
    """Clamp round-off negatives to zero; reject anything below ``-VAR_CLAMP``."""
    var = np.asarray(var, dtype=float)
    if np.any(var < -VAR_CLAMP):
        raise DomainError(f"negative variance {var.min():.3e} beyond round-off tolerance")
    var = np.maximum(var, 0.0)
    return float(var) if var.ndim == 0 else var


def _var_array(var):
    return np.asarray(clean_variance(var), dtype=float)


def correlation(var_u, var_v, cov):
    """Correlation coefficient with boundary clamping; 0 where a variance is 0."""
    var_u, var_v, cov = np.broadcast_arrays(
        np.asarray(var_u, float), np.asarray(var_v, float), np.asarray(cov, float))
    scale = np.sqrt(var_u * var_v)
    nondeg = scale > 0
    r = np.zeros(scale.shape)
    np.divide(cov, scale, out=r, where=nondeg)
    if np.any(np.abs(r) > 1.0 + CORR_CLAMP):
        raise DomainError("covariance violates cov^2 <= var_u * var_v")
    if np.any(~nondeg & (np.abs(cov) > VAR_CLAMP)):
        raise DomainError("nonzero covariance with a zero variance")
    return np.clip(r, -1.0, 1.0)


def _sgn(x):
    return np.sign(x).astype(float)


# ---------------------------------------------------------------- normal CDFs

def std_normal_cdf(x):
    """
    Standard normal CDF.

    Parameters
    ----------
    x: float
        evaluation point, must be finite

    Returns
    -------
    float
        ``P(Z <= x)`` for ``Z ~ N(0, 1)``
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf requires a finite argument, got {x}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _bvn_upper(h, k, r):
    """
    ``P(X > h, Y > k)`` for a standard bivariate normal with correlation ``r``.

    Drezner-Wesolowsky with Genz's double precision modifications: a 20-point
    Gauss-Legendre rule on the arcsine form for ``|r| < 0.925`` and the
    asymptotic expansion around ``|r| = 1`` otherwise.
    """
    h, k, r = (np.array(a, dtype=float) for a in np.broadcast_arrays(h, k, r))
    h = np.clip(h, -_Z_CLIP, _Z_CLIP)
    k = np.clip(k, -_Z_CLIP, _Z_CLIP)
    r = np.where(np.abs(r) > PERFECT_CORR, np.sign(r), r)
    out = np.empty(h.shape)

    lo = np.abs(r) < 0.925
    if np.any(lo):
        hl, kl, rl = h[lo], k[lo], r[lo]
        hs = (hl * hl + kl * kl) / 2.0
        asr = np.arcsin(rl)
        sn = np.sin(asr[:, None] * (1.0 + _GL_X) / 2.0)
        terms = np.exp((sn * (hl * kl)[:, None] - hs[:, None]) / (1.0 - sn * sn))
        out[lo] = terms @ _GL_W * asr / (4.0 * math.pi) + ndtr(-hl) * ndtr(-kl)

    hi = ~lo
    if np.any(hi):
        out[hi] = _bvn_upper_high(h[hi], k[hi], r[hi])
    return np.clip(out, 0.0, 1.0)


def _bvn_upper_high(h, k, r):
    neg = r < 0
    k = np.where(neg, -k, k)
    hk = h * k
    bvn = np.zeros(h.shape)

    series = np.abs(r) < 1.0
    if np.any(series):
        hs, ks, hks, rs_ = h[series], k[series], hk[series], r[series]
        as_ = (1.0 - rs_) * (1.0 + rs_)
        a = np.sqrt(as_)
        bs = (hs - ks) ** 2
        c = (4.0 - hks) / 8.0
        d = (12.0 - hks) / 16.0
        asr = -(bs / as_ + hks) / 2.0
        with np.errstate(under="ignore", over="ignore"):
            val = np.where(
                asr > -100.0,
                a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0
                                   + c * d * as_ * as_ / 5.0),
                0.0)
            b = np.sqrt(bs)
            sp = math.sqrt(_TWO_PI) * ndtr(-b / a)
            val = val - np.where(
                hks > -100.0,
                np.exp(-hks / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0),
                0.0)
            a2 = a / 2.0
            xs = (a2[:, None] * (1.0 + _GL_X)) ** 2
            rsq = np.sqrt(1.0 - xs)
            asr2 = -(bs[:, None] / xs + hks[:, None]) / 2.0
            spn = 1.0 + c[:, None] * xs * (1.0 + d[:, None] * xs)
            ep = np.exp(-hks[:, None] * xs / (2.0 * (1.0 + rsq) ** 2)) / rsq
            contrib = np.where(asr2 > -100.0, np.exp(asr2) * (ep - spn), 0.0)
            val = val + a2 * (contrib @ _GL_W)
        bvn[series] = -val / _TWO_PI

    pos = ~neg
    out = np.empty(h.shape)
    out[pos] = bvn[pos] + ndtr(-np.maximum(h[pos], k[pos]))
    if np.any(neg):
        hn, kn, bn = h[neg], k[neg], bvn[neg]
        span = np.where(hn < 0, ndtr(kn) - ndtr(hn), ndtr(-hn) - ndtr(-kn))
        out[neg] = np.where(hn >= kn, -bn, span - bn)
    return out


def bvn_cdf(x1, x2, mean_u, mean_v, var_u, var_v, cov):
    """Vectorised ``P(U <= x1, V <= x2)``; zero variances are point masses."""
    args = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                 for a in (x1, x2, mean_u, mean_v, var_u, var_v, cov)))
    x1, x2, mean_u, mean_v, var_u, var_v, cov = args
    var_u = _var_array(var_u)
    var_v = _var_array(var_v)
    r = correlation(var_u, var_v, cov)
    sd_u = np.sqrt(var_u)
    sd_v = np.sqrt(var_v)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(sd_u > 0, (x1 - mean_u) / sd_u, np.where(x1 >= mean_u, np.inf, -np.inf))
        k = np.where(sd_v > 0, (x2 - mean_v) / sd_v, np.where(x2 >= mean_v, np.inf, -np.inf))
    return _bvn_upper(-h, -k, r)


def bivariate_normal_cdf(x1, x2, g):
    """
    Bivariate normal CDF ``P(U <= x1, V <= x2)`` for ``(U, V) ~ g``.

    Accurate to about 1e-15 absolute; perfect correlation is handled with its
    analytic limit.
    """
    if not (math.isfinite(x1) and math.isfinite(x2)):
        raise DomainError("bivariate_normal_cdf requires finite limits")
    return float(bvn_cdf(x1, x2, g.mean_u, g.mean_v, g.var_u, g.var_v, g.cov_uv))


# ----------------------------------------------------------------- lemmas

def sign_mean(mean, var):
    """Vectorised ``E{sgn u}`` for ``u ~ N(mean, var)``."""
    mean = np.asarray(mean, dtype=float)
    var = _var_array(var)
    sd = np.sqrt(var)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, -mean / sd, 0.0)
    return np.where(sd > 0, 1.0 - 2.0 * ndtr(np.clip(z, -_Z_CLIP, _Z_CLIP)), _sgn(mean))


def lemma1_sign_mean(g):
    """
    Expected sign of a Gaussian variable, ``1 - 2 Phi(-mean / sd)``.

    A point mass (``variance == 0``) returns ``sgn(mean)`` with ``sgn(0) = 0``.
    """
    return float(sign_mean(g.mean, g.variance))


def sign_product(mean_u, mean_v, var_u, var_v, cov):
    """Vectorised ``E{sgn u sgn v}`` for a jointly Gaussian pair."""
    mean_u, mean_v, var_u, var_v, cov = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean_u, mean_v, var_u, var_v, cov)))
    var_u = _var_array(var_u)
    var_v = _var_array(var_v)
    correlation(var_u, var_v, cov)
    out = np.empty(mean_u.shape)

    both = (var_u > 0) & (var_v > 0)
    if np.any(both):
        mu, mv, vu, vv, c = (a[both] for a in (mean_u, mean_v, var_u, var_v, cov))
        # orthant probabilities: (-,-) + (+,+) - (-,+) - (+,-); the sign-flipped
        # covariance flips the correlation
        out[both] = (bvn_cdf(0.0, 0.0, mu, mv, vu, vv, c)
                     + bvn_cdf(0.0, 0.0, -mu, -mv, vu, vv, c)
                     - bvn_cdf(0.0, 0.0, mu, -mv, vu, vv, -c)
                     - bvn_cdf(0.0, 0.0, -mu, mv, vu, vv, -c))

    only_v = (var_u == 0) & (var_v > 0)
    out[only_v] = _sgn(mean_u[only_v]) * sign_mean(mean_v[only_v], var_v[only_v])
    only_u = (var_u > 0) & (var_v == 0)
    out[only_u] = _sgn(mean_v[only_u]) * sign_mean(mean_u[only_u], var_u[only_u])
    neither = (var_u == 0) & (var_v == 0)
    out[neither] = _sgn(mean_u[neither]) * _sgn(mean_v[neither])
    return np.clip(out, -1.0, 1.0)


def lemma2_sign_product(g):
    """
    ``E{sgn u sgn v}`` as a signed sum of four bivariate normal orthant masses.

    Degenerate marginals fall back to ``sgn(mean) * E{sgn other}``.
    """
    return float(sign_product(g.mean_u, g.mean_v, g.var_u, g.var_v, g.cov_uv))


def cross_moment_simplified(mean_u, mean_v, var_u, var_v, cov):
    """
    ``E{u sgn v}`` in regression form.

    Writing ``u = mean_u + (cov / var_v)(v - mean_v) + noise`` gives
    ``mean_u E{sgn v} + cov sqrt(2/pi) exp(-mean_v^2 / (2 var_v)) / sd_v``.
    Valid for singular covariances as well; ``var_u`` does not enter.
    """
    mean_u, mean_v, var_v, cov = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean_u, mean_v, var_v, cov)))
    del var_u
    var_v = _var_array(var_v)
    sd_v = np.sqrt(var_v)
    pos = sd_v > 0
    with np.errstate(divide="ignore", invalid="ignore", under="ignore"):
        slope = np.where(pos, cov / sd_v, 0.0) * _SQRT_2_OVER_PI
        gauss = np.where(pos, np.exp(-0.5 * (mean_v / np.where(pos, sd_v, 1.0)) ** 2), 0.0)
    return mean_u * sign_mean(mean_v, var_v) + slope * gauss


def cross_moment_precision(mean_u, mean_v, var_u, var_v, cov, flipped_sign=False):
    """
    ``E{u sgn v}`` assembled from the precision matrix ``[[a, c], [c, b]]``.

    With ``delta = b - c^2 / a`` the expectation is

        (2 pi a |S|)^(-1/2) * [ (mean_u + c/a mean_v) I1 - c/a I2 ]

    where ``I1 = sqrt(2 pi / delta) (1 - 2 Phi(-mean_v sqrt(delta)))`` is the
    integral of ``sgn(v)`` against the unnormalised ``N(mean_v, 1/delta)``
    kernel and ``I2`` the corresponding folded-Gaussian mean integral of
    ``|v|``. Requires a nonsingular covariance.

    ``flipped_sign=True`` evaluates ``I1`` with ``Phi(+mean_v sqrt(delta))``;
    that variant is wrong whenever ``mean_v != 0`` and exists only so the
    verification suite can demonstrate that it catches it.
    """
    mean_u, mean_v, var_u, var_v, cov = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean_u, mean_v, var_u, var_v, cov)))
    det = var_u * var_v - cov * cov
    if np.any(det <= 0):
        raise DomainError("precision-matrix form needs a nonsingular covariance")
    a = var_v / det
    b = var_u / det
    c = -cov / det
    delta = b - c * c / a
    c_a = c / a
    root = np.sqrt(delta)
    scale = np.sqrt(_TWO_PI / delta)
    arg1 = mean_v * root if flipped_sign else -mean_v * root
    int1 = (mean_u + c_a * mean_v) * scale * (1.0 - 2.0 * ndtr(arg1))
    with np.errstate(under="ignore"):
        folded = (np.sqrt(2.0 / (delta * math.pi)) * np.exp(-0.5 * mean_v * mean_v * delta)
                  + mean_v * (1.0 - 2.0 * ndtr(-mean_v * root)))
    int2 = c_a * scale * folded
    return (int1 - int2) / np.sqrt(_TWO_PI * a * det)


def cross_moment(mean_u, mean_v, var_u, var_v, cov):
    """Vectorised ``E{u sgn v}`` with degenerate and singular branches."""
    mean_u, mean_v, var_u, var_v, cov = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (mean_u, mean_v, var_u, var_v, cov)))
    var_u = _var_array(var_u)
    var_v = _var_array(var_v)
    r = correlation(var_u, var_v, cov)
    out = np.empty(mean_u.shape)

    point_v = var_v == 0
    out[point_v] = mean_u[point_v] * _sgn(mean_v[point_v])

    regular = ~point_v & (var_u > 0) & (1.0 - r * r > SINGULAR_DET)
    if np.any(regular):
        out[regular] = cross_moment_precision(
            *(a[regular] for a in (mean_u, mean_v, var_u, var_v, cov)))
    singular = ~point_v & ~regular
    if np.any(singular):
        out[singular] = cross_moment_simplified(
            *(a[singular] for a in (mean_u, mean_v, var_u, var_v, cov)))
    return out


def lemma3_cross_moment(g):
    """
    ``E{u sgn v}`` for a jointly Gaussian pair.

    Nonsingular pairs use the precision-matrix assembly; perfectly correlated
    pairs (including ``u = v``) use the equivalent regression form, and a point
    mass ``v`` gives ``mean_u * sgn(mean_v)``.
    """
    return float(cross_moment(g.mean_u, g.mean_v, g.var_u, g.var_v, g.cov_uv))
