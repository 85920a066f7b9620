"""
Reproducible signal sources for system identification experiments.

Every random stream is drawn from a counter-based Philox generator keyed by
``(master_seed, namespace, stream_id, channel)``, so the samples of a run do
not depend on which other runs exist or on the order they are generated in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError
from .linalg import ar1_correlation

REGRESSOR = 0
NOISE = 1

_CHUNK = 4096


@dataclass(frozen=True)
class PlantSpec:
    """Unknown linear system ``y_n = x_n^T w_star + z_n`` with white noise variance ``noise_var``."""

    w_star: np.ndarray
    noise_var: float

    def __post_init__(self):
        w = np.array(self.w_star, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise DomainError("w_star must be a non-empty finite vector")
        if not (math.isfinite(self.noise_var) and self.noise_var >= 0):
            raise DomainError("noise variance must be finite and >= 0")
        w.setflags(write=False)
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def L(self):
        return self.w_star.size


REGRESSOR_MODES = ("tapped_delay", "independent")


@dataclass(frozen=True)
class InputModel:
    """
    Scalar AR(1) input ``x_n = ar_coeff x_{n-1} + nu_n``, ``nu_n ~ N(0, innovation_var)``.

    ``regressor`` selects how regressor vectors are formed: ``tapped_delay``
    slides a window over one scalar sequence; ``independent`` draws every
    vector afresh from ``N(0, R)`` with the same correlation matrix, which
    makes successive regressors independent.
    """

    ar_coeff: float
    innovation_var: float
    regressor: str = "tapped_delay"

    def __post_init__(self):
        if not -1.0 < self.ar_coeff < 1.0:
            raise DomainError(f"AR(1) coefficient {self.ar_coeff} is not stationary")
        if not (math.isfinite(self.innovation_var) and self.innovation_var > 0):
            raise DomainError("innovation variance must be positive")
        if self.regressor not in REGRESSOR_MODES:
            raise DomainError(f"unknown regressor mode {self.regressor!r}")

    @property
    def signal_var(self):
        return self.innovation_var / (1.0 - self.ar_coeff ** 2)

    def correlation(self, L):
        return ar1_correlation(L, self.ar_coeff, self.signal_var)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: int = 0
    namespace: int = 0

    def generator(self, channel):
        key = np.random.SeedSequence(int(self.master_seed),
                                     spawn_key=(int(self.namespace), int(self.stream_id), int(channel)))
        return np.random.Generator(np.random.Philox(key))


@dataclass
class _AR1Source:
    model: InputModel
    rng: np.random.Generator
    last: float = field(default=None)

    def take(self, count):
        """Next ``count`` samples of the scalar process, stationary from the first."""
        z = self.rng.standard_normal(count)
        c = self.model.ar_coeff
        nu = math.sqrt(self.model.innovation_var) * z
        if self.last is None:
            # first sample is a stationary draw, the rest follow the recursion
            first = math.sqrt(self.model.signal_var) * z[0]
            rest = lfilter([1.0], [1.0, -c], nu[1:], zi=[c * first])[0]
            out = np.concatenate(([first], rest))
        else:
            out = lfilter([1.0], [1.0, -c], nu, zi=[c * self.last])[0]
        if out.size:
            self.last = float(out[-1])
        return out


def ar1_samples(model, seed, count):
    """``count`` samples of the stationary scalar AR(1) process for ``seed``."""
    return _AR1Source(model, seed.generator(REGRESSOR)).take(count)


def regressor_windows(model, seed, L, n_iters):
    """
    Regressor vectors ``x_0 .. x_{n_iters-1}`` as an ``(n_iters, L)`` array.

    Row ``n`` is ``[s_{n+L-1}, ..., s_n]`` for the scalar sequence ``s``, i.e.
    the newest sample first; the sequence is stationary from ``s_0`` so every
    window is stationary.
    """
    s = ar1_samples(model, seed, n_iters + L - 1)
    return np.lib.stride_tricks.sliding_window_view(s, L)[:, ::-1]


def independent_regressors(model, seed, L, n_iters):
    """``n_iters`` i.i.d. regressor vectors from ``N(0, R)``."""
    chol = np.linalg.cholesky(model.correlation(L))
    z = seed.generator(REGRESSOR).standard_normal((n_iters, L))
    return np.einsum("nk,ik->ni", z, chol)


def regressor_vectors(model, seed, L, n_iters):
    """Regressors for one run in the mode selected by ``model.regressor``."""
    if model.regressor == "independent":
        return independent_regressors(model, seed, L, n_iters)
    return regressor_windows(model, seed, L, n_iters)


def regressor_stream(model, seed, L):
    """Infinite iterator over tapped-delay regressors; equal to :func:`regressor_windows` row by row."""
    src = _AR1Source(model, seed.generator(REGRESSOR))
    buf = src.take(L - 1) if L > 1 else np.empty(0)
    while True:
        chunk = src.take(_CHUNK)
        s = np.concatenate((buf, chunk))
        windows = np.lib.stride_tricks.sliding_window_view(s, L)[:, ::-1]
        for row in windows:
            yield row.copy()
        buf = s[s.size - (L - 1):] if L > 1 else np.empty(0)


def noise_samples(noise_var, seed, count):
    """White Gaussian measurement noise with variance ``noise_var``."""
    return math.sqrt(noise_var) * seed.generator(NOISE).standard_normal(count)


def noise_stream(noise_var, seed):
    rng = seed.generator(NOISE)
    sd = math.sqrt(noise_var)
    while True:
        yield from (sd * rng.standard_normal(_CHUNK)).tolist()


def plant_output(plant, x, noise_draw):
    """``x^T w_star + noise_draw``."""
    x = np.asarray(x, dtype=float)
    if x.shape != plant.w_star.shape:
        raise DomainError(f"regressor length {x.shape} does not match plant {plant.w_star.shape}")
    return float(x @ plant.w_star) + noise_draw
