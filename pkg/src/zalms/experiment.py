"""
Experiment orchestration: configuration, theory and Monte Carlo runs, and
the files they produce.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from . import gaussmath as gm
from .errors import ConfigError
from .filtering import AlgoParams
from .harness import EnsembleConfig, JointDump, compare_curves, joint_ensemble, run_ensemble
from .oracles import lemma_grid, mc_moments, oracle_moment
from .signals import InputModel, PlantSpec
from .theory import ModelKind, run_model

DEFAULT_W_STAR = (0.8, 0.5, 0.3, 0.1, 0.05, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                -0.05, -0.1, -0.3, -0.5, -0.8)

MANIFEST_TOOL = "zalms"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class PlantConfig(_Section):
    w_star: List[float] = Field(default_factory=lambda: list(DEFAULT_W_STAR), min_length=1)
    noise_var: float = Field(0.01, ge=0)


class InputConfig(_Section):
    ar_coeff: float = Field(0.6, gt=-1, lt=1)
    innovation_var: float = Field(0.64, gt=0)
    regressor: Literal["tapped_delay", "independent"] = "tapped_delay"


class AlgoConfig(_Section):
    mu: float = Field(0.01, gt=0)
    lambda_: float = Field(0.01, ge=0, alias="lambda")


class RunConfig(_Section):
    iters: int = Field(1000, ge=1)
    runs: int = Field(500, ge=1)
    master_seed: int = Field(2017, ge=0, lt=2 ** 64)


class JointDumpConfig(_Section):
    i: int = Field(ge=0)
    j: int = Field(ge=0)
    at_iter: int = Field(ge=0)
    samples: int = Field(5000, ge=1)


def _fig2_dumps():
    return [JointDumpConfig(i=2, j=7, at_iter=800), JointDumpConfig(i=2, j=7, at_iter=100),
            JointDumpConfig(i=8, j=9, at_iter=800)]


class ExperimentConfig(_Section):
    plant: PlantConfig = Field(default_factory=PlantConfig)
    input: InputConfig = Field(default_factory=InputConfig)
    algo: AlgoConfig = Field(default_factory=AlgoConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    models: List[Literal["exact", "baseline"]] = Field(
        default_factory=lambda: ["exact", "baseline"], min_length=1)
    joint_dumps: List[JointDumpConfig] = Field(default_factory=_fig2_dumps)

    @model_validator(mode="after")
    def _cross_checks(self):
        L = len(self.plant.w_star)
        if len(set(self.models)) != len(self.models):
            raise ValueError("models: duplicate entries")
        if "joint_dumps" not in self.model_fields_set:
            # default dumps only apply to runs long enough to reach them
            self.joint_dumps = [d for d in self.joint_dumps if d.at_iter <= self.run.iters]
        for d in self.joint_dumps:
            if d.i >= L or d.j >= L:
                raise ValueError(f"joint_dumps: tap index out of range [0, {L}) in {d}")
            if d.i == d.j:
                raise ValueError(f"joint_dumps: i and j must differ in {d}")
            if d.at_iter > self.run.iters:
                raise ValueError(f"joint_dumps: at_iter {d.at_iter} exceeds run.iters")
        return self

    def to_dict(self):
        return self.model_dump(by_alias=True, mode="json")

    def plant_spec(self):
        return PlantSpec(np.array(self.plant.w_star), self.plant.noise_var)

    def input_model(self):
        return InputModel(self.input.ar_coeff, self.input.innovation_var, self.input.regressor)

    def algo_params(self):
        return AlgoParams(self.algo.mu, self.algo.lambda_)


def _format_validation(exc):
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{path}: {msg}" if path != "<root>" else msg)
    return "; ".join(lines)


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a JSON object")
    if data.get("tool") == MANIFEST_TOOL and "config" in data:
        data = data["config"]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def read_config_data(path):
    """Raw JSON object from a config file or the ``config`` echo of a manifest."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                          f"{exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    if data.get("tool") == MANIFEST_TOOL and "config" in data:
        data = data["config"]
    return data


def load_config(path):
    """
    Read and validate a JSON experiment config (or a run manifest).

    Missing fields take the default experiment values; unknown keys are
    rejected. Errors name the offending key path.
    """
    return config_from_dict(read_config_data(path))


# ------------------------------------------------------------------ output

def _fmt(x):
    return format(float(x), ".17g")


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def curve_csv(curve, extra=None):
    L = curve.m.shape[1]
    header = ["n", "mse", "emse"] + [f"m_{k}" for k in range(L)]
    extra = extra or {}
    header += list(extra)
    rows = []
    for n in range(len(curve.mse)):
        row = [str(n), _fmt(curve.mse[n]), _fmt(curve.emse[n])]
        row += [_fmt(v) for v in curve.m[n]]
        row += [_fmt(col[n]) for col in extra.values()]
        rows.append(row)
    return _csv_text(header, rows)


def comparison_csv(report):
    header = ["n", "mse_theory", "mse_mc", "mse_mc_stderr", "emse_theory", "emse_mc",
              "emse_mc_stderr", "emse_in_band"]
    rows = [[str(n), _fmt(report.mse_theory[n]), _fmt(report.mse_mc[n]),
             _fmt(report.mse_mc_se[n]), _fmt(report.emse_theory[n]), _fmt(report.emse_mc[n]),
             _fmt(report.emse_mc_se[n]), str(int(report.emse_in_band[n]))]
            for n in report.n]
    return _csv_text(header, rows)


def joint_csv(sample):
    rows = [[str(r), _fmt(a), _fmt(b)] for r, (a, b) in enumerate(sample.values)]
    return _csv_text(["run", f"wt_{sample.i}", f"wt_{sample.j}"], rows)


@dataclass
class ExperimentResult:
    out_dir: Path
    files: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    stats: object = None
    comparisons: dict = field(default_factory=dict)
    joint: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)


def run_experiment(config, out_dir, *, workers=1, run_mc=True, log=None):
    """
    Run theory models, the Monte Carlo ensemble and the joint dumps, and
    write the CSV files plus ``manifest.json`` into ``out_dir``.

    Files: ``theory_<model>.csv``, ``mc.csv``, ``comparison.csv`` (theory vs
    simulation for the first listed model), ``joint_<i>_<j>_<n>.csv`` and
    ``manifest.json``. Everything except the manifest's wall time is a
    deterministic function of the config.
    """
    say = log or (lambda msg: None)
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plant = config.plant_spec()
    im = config.input_model()
    p = config.algo_params()
    iters = config.run.iters
    res = ExperimentResult(out_dir)

    def emit(name, text):
        (out_dir / name).write_text(text)
        res.files[name] = hashlib.sha256(text.encode()).hexdigest()
        say(f"wrote {out_dir / name}")

    dump_iters = sorted({d.at_iter for d in config.joint_dumps if d.at_iter < iters})
    for kind in config.models:
        say(f"theory model '{kind}': {iters} iterations")
        curve = run_model(plant, im, p, ModelKind(kind), iters, record_K=dump_iters)
        res.curves[kind] = curve
        emit(f"theory_{kind}.csv", curve_csv(curve))

    summary = {"models": {}}
    if run_mc:
        say(f"Monte Carlo: {config.run.runs} runs x {iters} iterations")
        cfg = EnsembleConfig(config.run.runs, iters, config.run.master_seed, workers=workers)
        stats = run_ensemble(plant, im, p, cfg)
        res.stats = stats
        emit("mc.csv", curve_csv(stats, {"mse_stderr": stats.mse_se,
                                         "emse_stderr": stats.emse_se}))
        band_from = min(100, iters - 1)
        for kind in config.models:
            rep = compare_curves(res.curves[kind], stats, band_from=band_from)
            res.comparisons[kind] = rep
            summary["models"][kind] = rep.summary()
        emit("comparison.csv", comparison_csv(res.comparisons[config.models[0]]))

        dumps = [JointDump(d.i, d.j, d.at_iter, d.samples) for d in config.joint_dumps]
        if dumps:
            say(f"joint dumps: {len(dumps)} requested")
            res.joint = joint_ensemble(plant, im, p, dumps, config.run.master_seed,
                                       workers=workers)
            summary["joint_dumps"] = []
            ref = res.curves.get("exact") or next(iter(res.curves.values()))
            for s in res.joint:
                emit(f"joint_{s.i}_{s.j}_{s.at_iter}.csv", joint_csv(s))
                entry = s.summary()
                if s.at_iter in ref.K_snapshots:
                    idx = [s.i, s.j]
                    m = ref.m[s.at_iter]
                    central = ref.K_snapshots[s.at_iter] - np.outer(m, m)
                    entry["theory_cov"] = central[np.ix_(idx, idx)].tolist()
                    entry["cov_stderr"] = s.cov_stderr().tolist()
                summary["joint_dumps"].append(entry)
    else:
        for kind in config.models:
            summary["models"][kind] = {
                "steady_emse_theory": float(res.curves[kind].emse[-max(1, iters // 10):].mean())}

    res.manifest = {
        "tool": MANIFEST_TOOL,
        "version": __version__,
        "config": config.to_dict(),
        "master_seed": config.run.master_seed,
        "monte_carlo": bool(run_mc),
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "files": dict(res.files),
        "summary": summary,
    }
    (out_dir / "manifest.json").write_text(json.dumps(res.manifest, indent=2) + "\n")
    say(f"wrote {out_dir / 'manifest.json'}")
    return res


# ---------------------------------------------------------- lemma verification

GRIDS = {"default": (0.99, 1e-6), "high_corr": (0.999, 1e-5)}
# quadrature budget: four orders below the strictest acceptance tolerance
ORACLE_TOL = 1e-10


@dataclass
class VerifyReport:
    grid: str
    tuples: int
    tol: float
    max_err: dict
    precision_vs_regression: float
    mc_max_z: dict = field(default_factory=dict)
    mc_k: float = 4.0
    equivalence_tol: float = 1e-10

    @property
    def passed(self):
        ok = all(v <= self.tol for v in self.max_err.values())
        ok &= self.precision_vs_regression <= self.equivalence_tol
        ok &= all(v <= self.mc_k for v in self.mc_max_z.values())
        return bool(ok)

    def lines(self):
        out = [f"grid={self.grid} tuples={self.tuples} tol={self.tol:g}"]
        for k, v in self.max_err.items():
            out.append(f"{'PASS' if v <= self.tol else 'FAIL'} {k}: max |closed form - "
                       f"quadrature| = {v:.3e}")
        v = self.precision_vs_regression
        out.append(f"{'PASS' if v <= self.equivalence_tol else 'FAIL'} cross moment: "
                   f"max |precision-matrix form - regression form| = {v:.3e}")
        for k, z in self.mc_max_z.items():
            out.append(f"{'PASS' if z <= self.mc_k else 'FAIL'} {k}: max |closed form - "
                       f"Monte Carlo| / stderr = {z:.2f}")
        return out


def verify_lemmas(grid="default", *, inject_flipped_sign=False, mc_samples=None, n=240):
    """
    Check the three sign-moment closed forms against the independent oracles.

    ``inject_flipped_sign`` swaps in the cross-moment assembly with the
    flipped normal-CDF argument, which the suite must reject.
    """
    if grid not in GRIDS:
        raise ConfigError(f"unknown grid {grid!r}; choose from {sorted(GRIDS)}")
    max_corr, tol = GRIDS[grid]
    tuples = lemma_grid(n, max_corr)
    if grid == "high_corr":
        tuples += [gm.Gaussian2(mu, mv, 1.0, 2.0, s * max_corr * math.sqrt(2.0))
                   for mu, mv in ((0.0, 0.0), (0.5, -1.0), (-2.0, 0.3)) for s in (1, -1)]

    def lemma3(g):
        if inject_flipped_sign:
            return float(gm.cross_moment_precision(g.mean_u, g.mean_v, g.var_u, g.var_v,
                                                  g.cov_uv, flipped_sign=True))
        return gm.lemma3_cross_moment(g)

    err = {"sign_mean": 0.0, "sign_product": 0.0, "cross_moment": 0.0}
    zmax = {}
    equiv = 0.0
    for g in tuples:
        for marg in (g.marginal_u(), g.marginal_v()):
            err["sign_mean"] = max(err["sign_mean"], abs(
                gm.lemma1_sign_mean(marg) - oracle_moment("sign_mean", marg, tol=ORACLE_TOL).value))
        err["sign_product"] = max(err["sign_product"], abs(
            gm.lemma2_sign_product(g) - oracle_moment("sign_product", g, tol=ORACLE_TOL).value))
        c3 = lemma3(g)
        err["cross_moment"] = max(err["cross_moment"], abs(
            c3 - oracle_moment("cross_moment", g, tol=ORACLE_TOL).value))
        if 1.0 - g.correlation ** 2 > 0:
            simple = float(gm.cross_moment_simplified(g.mean_u, g.mean_v, g.var_u, g.var_v,
                                                      g.cov_uv))
            precision = float(gm.cross_moment_precision(g.mean_u, g.mean_v, g.var_u, g.var_v,
                                                      g.cov_uv, flipped_sign=inject_flipped_sign))
            equiv = max(equiv, abs(simple - precision) / max(1.0, abs(simple)))
        if mc_samples:
            est = mc_moments(g, mc_samples)
            vals = {"sign_mean": gm.lemma1_sign_mean(g.marginal_u()),
                    "sign_product": gm.lemma2_sign_product(g), "cross_moment": c3}
            for kind, val in vals.items():
                se = est[kind].error
                if kind != "cross_moment":
                    # sign variables have variance 1 - E^2; the sample value is 0 when no
                    # draw reaches a deep tail
                    se = max(se, math.sqrt(max(0.0, 1.0 - val * val) / mc_samples))
                diff = abs(val - est[kind].value)
                z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
                zmax[kind] = max(zmax.get(kind, 0.0), z)
    return VerifyReport(grid, len(tuples), tol, err, equiv, zmax)
