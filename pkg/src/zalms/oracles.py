"""
Independent numerical oracles for the Gaussian sign moments.

These integrate the Gaussian density directly or sample it; none of them
call the closed forms in :mod:`zalms.gaussmath`. Pair moments use adaptive
quadrature over the first Cholesky coordinate with the conditional sign
expectation of ``v`` taken from ``scipy.special.ndtr``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, OracleFailure
from .gaussmath import Gaussian1, Gaussian2

KINDS = ("sign_mean", "sign_product", "cross_moment")

# standard-normal coordinates are integrated over [-Z, Z]; tail mass < 2e-33
_Z = 12.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    error: float
    method: str
    evaluations: int = 0


def _pdf(z):
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _sign(x):
    return (x > 0) - (x < 0)


class _Integrator:
    """
    Piecewise adaptive quadrature over ``[-12, 12]``.

    Callers run inside :func:`_strict_quadrature` so that a non-converged
    piece raises instead of warning.
    """

    def __init__(self, tol, limit=200):
        self.tol = tol
        self.limit = limit
        self.evaluations = 0
        self.error = 0.0

    def __call__(self, f, breaks=()):
        pts = sorted({-_Z, 0.0, _Z, *(b for b in breaks if -_Z < b < _Z)})
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, err, info = integrate.quad(f, lo, hi, epsabs=self.tol, epsrel=0.0,
                                            limit=self.limit, full_output=1)[:3]
            self.evaluations += info["neval"]
            self.error += err
            total += val
        return total


class _strict_quadrature(warnings.catch_warnings):
    def __enter__(self):
        out = super().__enter__()
        warnings.simplefilter("error", integrate.IntegrationWarning)
        return out

    def __exit__(self, exc_type, exc, tb):
        super().__exit__(exc_type, exc, tb)
        if exc_type is not None and issubclass(exc_type, integrate.IntegrationWarning):
            raise OracleFailure(f"quadrature did not converge: {exc}") from None
        return False


def _quad_sign_mean(g, tol):
    if g.variance == 0:
        return float(_sign(g.mean)), 0.0, 0
    sd = math.sqrt(g.variance)
    quad = _Integrator(tol)
    val = quad(lambda z: _sign(g.mean + sd * z) * _pdf(z), breaks=(-g.mean / sd,))
    return val, quad.error, quad.evaluations


def _quad_pair(kind, g, tol):
    """Quadrature over ``z1`` for ``u = mu_u + s_u z1``, ``v = mu_v + s_v (r z1 + q z2)``."""
    sd_u, sd_v = math.sqrt(g.var_u), math.sqrt(g.var_v)
    r = g.correlation
    q = math.sqrt(max(0.0, 1.0 - r * r))
    outer_quad = _Integrator(tol)

    if kind == "sign_product":
        def u_factor(z1):
            return _sign(g.mean_u + sd_u * z1)
    else:
        def u_factor(z1):
            return g.mean_u + sd_u * z1
    u_breaks = (-g.mean_u / sd_u,) if sd_u > 0 and kind == "sign_product" else ()

    if sd_v == 0:
        # v is a constant; only the u-marginal is integrated
        val = outer_quad(lambda z1: u_factor(z1) * _pdf(z1), breaks=u_breaks)
        val *= _sign(g.mean_v)
    elif q < 1e-9:
        # perfectly correlated pair: v is a function of z1 alone
        def f(z1):
            return u_factor(z1) * _sign(g.mean_v + sd_v * r * z1) * _pdf(z1)
        val = outer_quad(f, breaks=u_breaks + (-g.mean_v / (sd_v * r),))
    else:
        # conditional on z1, E{sgn v | z1} = 1 - 2 P(z2 < b) exactly
        def inner(z1):
            b = (-g.mean_v / sd_v - r * z1) / q
            return special.ndtr(-b) - special.ndtr(b)

        val = outer_quad(lambda z1: u_factor(z1) * _pdf(z1) * inner(z1), breaks=u_breaks)
    return val, outer_quad.error, outer_quad.evaluations


@lru_cache(maxsize=2)
def _base_normals(seed, samples):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((2, samples))
    z.setflags(write=False)
    return z


def _mc(kind, g, samples, seed):
    z1, z2 = _base_normals(seed, samples)
    if kind == "sign_mean":
        vals = np.sign(g.mean + math.sqrt(g.variance) * z1)
    else:
        sd_u, sd_v = math.sqrt(g.var_u), math.sqrt(g.var_v)
        r = g.correlation
        q = math.sqrt(max(0.0, 1.0 - r * r))
        u = g.mean_u + sd_u * z1
        sv = np.sign(g.mean_v + sd_v * (r * z1 + q * z2))
        vals = (np.sign(u) if kind == "sign_product" else u) * sv
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def mc_moments(g, samples, seed=0):
    """
    All three sign moments of a pair from one shared Monte Carlo draw.

    Returns a dict keyed like :data:`KINDS`; ``sign_mean`` refers to ``u``.
    """
    z1, z2 = _base_normals(seed, samples)
    r = g.correlation
    u = g.mean_u + math.sqrt(g.var_u) * z1
    sv = np.sign(g.mean_v + math.sqrt(g.var_v) * (r * z1 + math.sqrt(max(0.0, 1.0 - r * r)) * z2))
    su = np.sign(u)
    out = {}
    for kind, vals in (("sign_mean", su), ("sign_product", su * sv), ("cross_moment", u * sv)):
        out[kind] = OracleEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)),
                                   "monte_carlo", samples)
    return out


def oracle_moment(kind, g, *, tol=1e-11, samples=None, seed=0):
    """
    Estimate a sign moment without the closed forms.

    Parameters
    ----------
    kind: str
        one of ``sign_mean`` (``E{sgn u}``, needs a :class:`Gaussian1`),
        ``sign_product`` (``E{sgn u sgn v}``) or ``cross_moment``
        (``E{u sgn v}``), the last two needing a :class:`Gaussian2`
    g: Gaussian1 or Gaussian2
        distribution parameters
    tol: float, optional
        absolute tolerance of the adaptive quadrature (tolerance mode)
    samples: int, optional
        switch to seeded Monte Carlo with this many draws
    seed: int, optional
        Monte Carlo seed

    Returns
    -------
    OracleEstimate
        value with an error estimate: the accumulated quadrature error bound,
        or the Monte Carlo standard error
    """
    if kind not in KINDS:
        raise DomainError(f"unknown oracle kind {kind!r}")
    expected = Gaussian1 if kind == "sign_mean" else Gaussian2
    if not isinstance(g, expected):
        raise DomainError(f"{kind} needs a {expected.__name__}")

    if samples is not None:
        value, err = _mc(kind, g, int(samples), seed)
        return OracleEstimate(value, err, "monte_carlo", int(samples))

    with _strict_quadrature():
        if kind == "sign_mean":
            value, err, nev = _quad_sign_mean(g, tol)
        else:
            value, err, nev = _quad_pair(kind, g, tol)
    if not err <= max(100 * tol, 1e-9):
        raise OracleFailure(f"{kind}: quadrature error estimate {err:.2e} over budget")
    return OracleEstimate(value, err, "quadrature", nev)


def quad_normal_cdf(x, tol=1e-13):
    """``P(Z <= x)`` by adaptive quadrature of the standard normal density."""
    val, err = integrate.quad(_pdf, -np.inf, x, epsabs=tol, epsrel=0.0, limit=200)
    return val


def quad_bvn_cdf(x1, x2, g, tol=1e-13):
    """``P(U <= x1, V <= x2)``: adaptive quadrature of the ``u`` density times
    the conditional CDF of ``v`` given ``u``."""
    sd_u, sd_v = math.sqrt(g.var_u), math.sqrt(g.var_v)
    r = g.correlation
    h = (x1 - g.mean_u) / sd_u
    k = (x2 - g.mean_v) / sd_v
    q = math.sqrt(max(0.0, 1.0 - r * r))
    if q == 0.0:
        raise DomainError("quad_bvn_cdf needs |r| < 1")

    def f(z):
        return _pdf(z) * 0.5 * math.erfc(-((k - r * z) / q) / math.sqrt(2.0))

    lo = -_Z * 3
    if h <= lo:
        return 0.0
    pts = [p for p in (0.0,) if lo < p < h]
    val, err = integrate.quad(f, lo, min(h, 3 * _Z), epsabs=tol, epsrel=0.0, limit=500,
                              points=pts or None)
    return val


def lemma_grid(n=240, max_corr=0.99, seed=20170101):
    """
    Deterministic grid of pair parameters for the verification suite.

    Means in [-3, 3], variances log-uniform in [1e-4, 4], correlations in
    ``[-max_corr, max_corr]``, plus fixed corner cases.
    """
    rng = np.random.default_rng(seed)
    corners = [
        (0.0, 0.0, 1.0, 1.0, 0.0),
        (0.0, 0.0, 1.0, 1.0, max_corr),
        (0.0, 0.0, 1.0, 1.0, -max_corr),
        (3.0, -3.0, 1e-4, 1e-4, 0.5),
        (-3.0, 3.0, 4.0, 4.0, -0.5),
        (0.01, -0.01, 1e-4, 4.0, max_corr),
        (2.0, 0.0, 1.0, 1.0, 0.0),
        (-1.0, 1.0, 0.5, 2.0, max_corr),
    ]
    grid = [Gaussian2(mu, mv, vu, vv, r * math.sqrt(vu * vv)) for mu, mv, vu, vv, r in corners]
    k = n - len(grid)
    means = rng.uniform(-3.0, 3.0, (k, 2))
    variances = 10.0 ** rng.uniform(-4.0, math.log10(4.0), (k, 2))
    corr = rng.uniform(-max_corr, max_corr, k)
    for (mu, mv), (vu, vv), r in zip(means, variances, corr):
        grid.append(Gaussian2(mu, mv, vu, vv, r * math.sqrt(vu * vv)))
    return grid
