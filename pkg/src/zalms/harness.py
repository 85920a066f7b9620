"""
Monte Carlo ensembles of ZA-LMS trajectories.

Runs are processed in fixed blocks of ``BLOCK`` consecutive run ids. Each
block is simulated independently (optionally on a thread pool) and the
per-block moments are merged in block order, so the statistics are
bit-identical for any number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .errors import DivergenceError, DomainError
from .signals import SeedSpec, noise_samples, regressor_vectors

BLOCK = 64


@dataclass(frozen=True)
class JointDump:
    i: int
    j: int
    at_iter: int
    samples: int = 5000


@dataclass(frozen=True)
class EnsembleConfig:
    runs: int
    iters: int
    master_seed: int = 0
    record_pairs: tuple = ()
    record_iters: tuple = ()
    namespace: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.runs < 1 or self.iters < 1:
            raise DomainError("runs and iters must be >= 1")

    def snapshot_iters(self):
        its = {d.at_iter if isinstance(d, JointDump) else d[2] for d in self.record_pairs}
        return sorted(its | set(self.record_iters))


@dataclass
class _Moment:
    """Running count / mean / centred sum of squares, merged in a fixed order."""

    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def of(cls, block):
        mean = block.mean(axis=0)
        return cls(block.shape[0], mean, ((block - mean) ** 2).sum(axis=0))

    def merge(self, other):
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
        return _Moment(n, mean, m2)

    def stderr(self):
        if self.count < 2:
            return np.full_like(self.mean, np.nan)
        return np.sqrt(self.m2 / (self.count - 1) / self.count)


@dataclass
class EnsembleStats:
    """Per-iteration ensemble statistics for iterations ``0 .. iters - 1``."""

    runs: int
    mse: np.ndarray
    mse_se: np.ndarray
    emse: np.ndarray
    emse_se: np.ndarray
    m: np.ndarray
    m_se: np.ndarray
    second_moments: dict = field(default_factory=dict)
    snapshots: dict = field(default_factory=dict)

    @property
    def n(self):
        return np.arange(self.mse.size)


def _run_block(plant, input_model, p, cfg, run_ids, w0, snap_iters):
    L = plant.L
    B = len(run_ids)
    X = np.empty((B, cfg.iters, L))
    Z = np.empty((B, cfg.iters))
    for b, rid in enumerate(run_ids):
        seed = SeedSpec(cfg.master_seed, rid, cfg.namespace)
        X[b] = regressor_vectors(input_model, seed, L, cfg.iters)
        Z[b] = noise_samples(plant.noise_var, seed, cfg.iters)

    w_star = plant.w_star
    mu = p.step_size
    rho = p.attractor_gain
    W = np.tile(w0, (B, 1))
    e2 = np.empty((B, cfg.iters))
    eps2 = np.empty((B, cfg.iters))
    wt = np.empty((B, cfg.iters, L))
    # overflow is detected and reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(cfg.iters):
            x = X[:, n, :]
            y = (x * w_star).sum(axis=1) + Z[:, n]
            e = y - (W * x).sum(axis=1)
            wt_n = W - w_star
            wt[:, n, :] = wt_n
            e2[:, n] = e * e
            eps = (wt_n * x).sum(axis=1)
            eps2[:, n] = eps * eps
            if rho:
                W = W + mu * e[:, None] * x - rho * np.sign(W)
            else:
                W = W + mu * e[:, None] * x

    bad = ~np.isfinite(e2)
    if bad.any() or not np.all(np.isfinite(W)):
        b, n = np.argwhere(bad)[0] if bad.any() else (0, cfg.iters - 1)
        raise DivergenceError(f"run {run_ids[b]} diverged at iteration {n}",
                              run_id=int(run_ids[b]), iteration=int(n))

    raw2 = {k: np.einsum("bi,bj->ij", wt[:, k, :], wt[:, k, :]) for k in cfg.record_iters}
    snaps = {k: wt[:, k, :].copy() for k in snap_iters}
    return _Moment.of(e2), _Moment.of(eps2), _Moment.of(wt), raw2, snaps


def run_ensemble(plant, input_model, p, cfg, w0=None):
    """
    Simulate ``cfg.runs`` independent ZA-LMS trajectories.

    Run ``r`` draws its regressor and noise from streams keyed by
    ``(cfg.master_seed, cfg.namespace, r)``. Iteration ``n`` records the
    state *before* the ``n``-th update: ``e_n^2``, the a-priori excess error
    ``(w~_n^T x_n)^2`` and ``w~_n``.

    Returns
    -------
    EnsembleStats
        ensemble means with standard errors; raw second moments
        ``E{w~ w~^T}`` at ``cfg.record_iters`` and per-run weight errors at
        every iteration named in ``record_iters`` or ``record_pairs``
    """
    L = plant.L
    w0 = np.zeros(L) if w0 is None else np.asarray(w0, dtype=float)
    snap_iters = cfg.snapshot_iters()
    for k in snap_iters:
        if not 0 <= k < cfg.iters:
            raise DomainError(f"recorded iteration {k} outside [0, {cfg.iters})")
    blocks = [range(s, min(s + BLOCK, cfg.runs)) for s in range(0, cfg.runs, BLOCK)]

    def work(ids):
        return _run_block(plant, input_model, p, cfg, ids, w0, snap_iters)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(ids) for ids in blocks]

    e2, eps2, wt, raw2, snaps = results[0]
    raw2 = dict(raw2)
    snaps = {k: [v] for k, v in snaps.items()}
    for r_e2, r_eps2, r_wt, r_raw2, r_snaps in results[1:]:
        e2 = e2.merge(r_e2)
        eps2 = eps2.merge(r_eps2)
        wt = wt.merge(r_wt)
        for k in raw2:
            raw2[k] = raw2[k] + r_raw2[k]
        for k in snaps:
            snaps[k].append(r_snaps[k])

    return EnsembleStats(
        runs=cfg.runs,
        mse=e2.mean, mse_se=e2.stderr(),
        emse=eps2.mean, emse_se=eps2.stderr(),
        m=wt.mean, m_se=wt.stderr(),
        second_moments={k: v / cfg.runs for k, v in raw2.items()},
        snapshots={k: np.concatenate(v) for k, v in snaps.items()},
    )


@dataclass
class ComparisonReport:
    n: np.ndarray
    mse_theory: np.ndarray
    mse_mc: np.ndarray
    mse_mc_se: np.ndarray
    emse_theory: np.ndarray
    emse_mc: np.ndarray
    emse_mc_se: np.ndarray
    emse_in_band: np.ndarray
    m_abs_dev: np.ndarray
    m_mc_se: np.ndarray
    band_from: int
    z: float

    @property
    def mse_abs_dev(self):
        return np.abs(self.mse_theory - self.mse_mc)

    @property
    def emse_abs_dev(self):
        return np.abs(self.emse_theory - self.emse_mc)

    @property
    def emse_rel_dev(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.emse_abs_dev / np.abs(self.emse_mc)

    @property
    def mse_rel_dev(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.mse_abs_dev / np.abs(self.mse_mc)

    def _window(self):
        k = max(1, int(round(0.1 * self.n.size)))
        return slice(self.n.size - k, None)

    @property
    def steady_emse_theory(self):
        return float(self.emse_theory[self._window()].mean())

    @property
    def steady_emse_mc(self):
        return float(self.emse_mc[self._window()].mean())

    @property
    def steady_mse_theory(self):
        return float(self.mse_theory[self._window()].mean())

    @property
    def steady_mse_mc(self):
        return float(self.mse_mc[self._window()].mean())

    @property
    def steady_emse_rel_dev(self):
        return abs(self.steady_emse_theory - self.steady_emse_mc) / abs(self.steady_emse_mc)

    @property
    def band_coverage(self):
        """Fraction of iterations ``n >= band_from`` with theory EMSE inside the MC band."""
        sel = self.n >= self.band_from
        return float(self.emse_in_band[sel].mean())

    def max_mean_dev_ratio(self, abs_tol=0.02, k_se=4.0):
        """``max |dev| / max(abs_tol, k_se * se)`` over all taps and iterations (<= 1 passes)."""
        allowed = np.maximum(abs_tol, k_se * np.nan_to_num(self.m_mc_se))
        return float(np.max(self.m_abs_dev / allowed))

    def summary(self):
        return {
            "steady_emse_theory": self.steady_emse_theory,
            "steady_emse_mc": self.steady_emse_mc,
            "steady_emse_rel_dev": self.steady_emse_rel_dev,
            "steady_mse_theory": self.steady_mse_theory,
            "steady_mse_mc": self.steady_mse_mc,
            "emse_band_coverage": self.band_coverage,
            "band_from": self.band_from,
            "max_mean_abs_dev": float(self.m_abs_dev.max()),
        }


def compare_curves(theory, emp, *, band_from=0, z=1.96):
    """
    Quantify theory-vs-simulation agreement iteration by iteration.

    ``emp`` is an :class:`EnsembleStats`, or any object with ``mse``,
    ``emse`` and ``m`` arrays (standard errors default to zero), so a theory
    curve can be compared with itself.
    """
    if len(theory.mse) != len(emp.mse):
        raise DomainError(f"curve lengths differ: {len(theory.mse)} vs {len(emp.mse)}")
    zeros = np.zeros_like(np.asarray(emp.emse, dtype=float))
    emse_se = np.asarray(getattr(emp, "emse_se", zeros))
    mse_se = np.asarray(getattr(emp, "mse_se", zeros))
    m_se = np.asarray(getattr(emp, "m_se", np.zeros_like(emp.m)))
    band = z * np.nan_to_num(emse_se)
    in_band = np.abs(theory.emse - emp.emse) <= band
    return ComparisonReport(
        n=np.arange(len(theory.mse)),
        mse_theory=np.asarray(theory.mse), mse_mc=np.asarray(emp.mse), mse_mc_se=mse_se,
        emse_theory=np.asarray(theory.emse), emse_mc=np.asarray(emp.emse), emse_mc_se=emse_se,
        emse_in_band=in_band,
        m_abs_dev=np.abs(np.asarray(theory.m) - np.asarray(emp.m)), m_mc_se=m_se,
        band_from=band_from, z=z,
    )


@dataclass
class JointSample:
    i: int
    j: int
    at_iter: int
    requested: int
    values: np.ndarray          # (count, 2) samples of (w~_i, w~_j)

    @property
    def count(self):
        return self.values.shape[0]

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def cov(self):
        if self.count < 2:
            return np.zeros((2, 2))
        return np.cov(self.values, rowvar=False)

    @property
    def skewness(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.nan_to_num(sps.skew(self.values, axis=0))

    @property
    def excess_kurtosis(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.nan_to_num(sps.kurtosis(self.values, axis=0, fisher=True))

    def cov_stderr(self):
        """Standard errors of the sample covariance entries (Gaussian approximation)."""
        c = self.cov
        n = max(self.count - 1, 1)
        var = (np.outer(np.diag(c), np.diag(c)) + c ** 2) / n
        return np.sqrt(var)

    def summary(self):
        return {
            "i": self.i, "j": self.j, "at_iter": self.at_iter,
            "requested": self.requested, "count": self.count,
            "mean": self.mean.tolist(), "cov": self.cov.tolist(),
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
        }


def dump_joint_samples(stats, pairs, L=None):
    """
    Collect ``(w~_i, w~_j)`` across runs at each requested iteration.

    Uses at most ``dump.samples`` runs; when the ensemble has fewer the
    sample reports the actual count.
    """
    out = []
    for d in pairs:
        if L is not None and not (0 <= d.i < L and 0 <= d.j < L):
            raise DomainError(f"tap index out of range in {d}")
        if d.at_iter not in stats.snapshots:
            raise DomainError(f"iteration {d.at_iter} was not recorded")
        snap = stats.snapshots[d.at_iter]
        if not (0 <= d.i < snap.shape[1] and 0 <= d.j < snap.shape[1]):
            raise DomainError(f"tap index out of range in {d}")
        take = min(d.samples, snap.shape[0])
        out.append(JointSample(d.i, d.j, d.at_iter, d.samples, snap[:take][:, [d.i, d.j]]))
    return out


def joint_ensemble(plant, input_model, p, pairs, master_seed, workers=1, namespace=1):
    """Dedicated ensemble sized to the largest requested sample count for each dump."""
    pairs = list(pairs)
    if not pairs:
        return []
    for d in pairs:
        if not (0 <= d.i < plant.L and 0 <= d.j < plant.L):
            raise DomainError(f"tap index out of range in {d}")
        if d.at_iter < 0 or d.samples < 1:
            raise DomainError(f"invalid joint dump {d}")
    cfg = EnsembleConfig(
        runs=max(d.samples for d in pairs),
        iters=max(d.at_iter for d in pairs) + 1,
        master_seed=master_seed,
        record_pairs=tuple(pairs),
        namespace=namespace,
        workers=workers,
    )
    stats = run_ensemble(plant, input_model, p, cfg)
    return dump_joint_samples(stats, pairs)
