"""
Command line entry point.

    zalms run [--config FILE] [--out DIR] [--seed N] [--runs N] [--iters N]
              [--models exact|baseline|both] [--no-mc] [--quiet] [--workers N]
    zalms verify-lemmas [--grid default|high_corr] [--mc-samples N]

Exit codes: 0 success, 1 config error, 2 compute error, 3 verification failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DivergenceError, DomainError, MomentConsistencyError, OracleFailure
from .experiment import GRIDS, config_from_dict, read_config_data, run_experiment, verify_lemmas

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COMPUTE = 2
EXIT_VERIFY = 3

MODEL_CHOICES = {"exact": ["exact"], "baseline": ["baseline"], "both": ["exact", "baseline"]}


def build_parser():
    parser = argparse.ArgumentParser(prog="zalms", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="theory curves, Monte Carlo ensemble and joint dumps")
    run.add_argument("--config", type=Path, help="JSON config or a previous manifest.json")
    run.add_argument("--out", type=Path, default=Path("zalms_out"), help="output directory")
    run.add_argument("--seed", type=int, help="override run.master_seed")
    run.add_argument("--runs", type=int, help="override run.runs")
    run.add_argument("--iters", type=int, help="override run.iters")
    run.add_argument("--models", choices=sorted(MODEL_CHOICES), help="theory models to run")
    run.add_argument("--no-mc", action="store_true", help="theory curves only")
    run.add_argument("--quiet", action="store_true")
    run.add_argument("--workers", type=int, default=1,
                     help="threads for the ensemble (outputs do not depend on it)")

    ver = sub.add_parser("verify-lemmas", help="check the sign-moment closed forms against oracles")
    ver.add_argument("--grid", choices=sorted(GRIDS), default="default")
    ver.add_argument("--mc-samples", type=int, default=0,
                     help="also compare against Monte Carlo with this many samples")
    ver.add_argument("--inject-flipped-sign", action="store_true", help=argparse.SUPPRESS)
    ver.add_argument("--quiet", action="store_true")
    return parser


def _load_raw(path):
    return {} if path is None else read_config_data(path)


def _apply_overrides(data, args):
    data = json.loads(json.dumps(data))
    run = data.setdefault("run", {})
    if not isinstance(run, dict):
        raise ConfigError("run: must be an object")
    for key, val in (("master_seed", args.seed), ("runs", args.runs), ("iters", args.iters)):
        if val is not None:
            run[key] = val
    if args.models is not None:
        data["models"] = MODEL_CHOICES[args.models]
    return data


def _cmd_run(args, err):
    say = None if args.quiet else (lambda msg: print(msg, file=err))
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        config = config_from_dict(_apply_overrides(_load_raw(args.config), args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    try:
        result = run_experiment(config, args.out, workers=args.workers, run_mc=not args.no_mc,
                                log=say)
    except (DivergenceError, MomentConsistencyError, DomainError, FloatingPointError) as exc:
        print(f"compute error in {type(exc).__module__}: {exc}", file=err)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"I/O error: {exc}", file=err)
        return EXIT_COMPUTE
    if say:
        for kind, s in result.manifest["summary"]["models"].items():
            print(f"{kind}: " + ", ".join(f"{k}={v:.6g}" for k, v in s.items()), file=err)
    return EXIT_OK


def _cmd_verify(args, out, err):
    try:
        rep = verify_lemmas(args.grid, inject_flipped_sign=args.inject_flipped_sign,
                            mc_samples=args.mc_samples or None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG
    except OracleFailure as exc:
        print(f"compute error: {exc}", file=err)
        return EXIT_COMPUTE
    if not args.quiet or not rep.passed:
        for line in rep.lines():
            print(line, file=out)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args, err)
    return _cmd_verify(args, out, err)


if __name__ == "__main__":
    sys.exit(main())
