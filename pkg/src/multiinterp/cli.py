"""Command line front end.

Usage::

    multiinterp run [EXPERIMENT] [--config PATH] [--seed N] [--out DIR]
                    [--tolerance-scale X] [--jobs N]

Either a config file or an experiment kind is required; an experiment kind on
its own runs the default config shipped for it.  One CSV per block is written
to the output directory.  Exit status: 0 when every check passes, 1 when a
check fails, 2 on configuration or precondition errors.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from . import config as cfgmod
from .errors import (ConfigError, ConsistencyError, InputError, NonConvergenceError, PreconditionError,
                     SolverError)
from .experiments import SCHEMAS, run_block
from .report import Report

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

DEFAULT_CONFIGS = {
    "boyd-indices": "boyd_indices.cfg",
    "k-functional": "k_functional.cfg",
    "interp-norm": "phi_analytic.cfg",
    "verify-structural": "structural.cfg",
    "sobolev-besov": "sobolev_besov.cfg",
    "lorentz": "lorentz.cfg",
}


def shipped_config(name: str) -> Path:
    return Path(str(resources.files("multiinterp") / "configs" / name))


def load_config(path) -> cfgmod.ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return cfgmod.load(text, SCHEMAS, source=str(path))
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _block_task(args):
    experiment, block, seed, scale = args
    try:
        return run_block(experiment, block.kind, block.name, block.values, seed, scale)
    except (NonConvergenceError, SolverError, ConsistencyError) as exc:
        # a numerical failure inside a check family fails that family only
        rep = Report(block.name)
        rep.add("error", math.nan, math.nan, math.nan, math.nan, False)
        rep.notes["error"] = f"{type(exc).__name__}: {exc}"
        return rep


def execute(cfg: cfgmod.ExperimentConfig, log=print) -> list:
    """Run every block of ``cfg`` and write its CSV; returns the reports in block order."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg.experiment, b, cfg.seed, cfg.tolerance_scale) for b in cfg.blocks]
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(tasks))) as pool:
            reports = list(pool.map(_block_task, tasks))
    else:
        reports = []
        for task in tasks:
            t0 = time.perf_counter()
            reports.append(_block_task(task))
            log(f"  {task[1].name}: {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    for rep in reports:
        (out / f"{rep.name}.csv").write_text(rep.to_csv(), encoding="utf-8")
        log(rep.summary())
        if "error" in rep.notes:
            log(f"  {rep.notes['error']}", file=sys.stderr)
    return reports


def run(config_path=None, overrides=None, log=print) -> int:
    """Parse ``overrides`` (command line flags) and run; returns the exit status."""
    parser = argparse.ArgumentParser(prog="multiinterp", description="Run interpolation check suites.")
    parser.add_argument("command", nargs="?", choices=["run"], default="run")
    parser.add_argument("experiment", nargs="?", choices=sorted(DEFAULT_CONFIGS),
                        help="run the shipped default config for this experiment kind")
    parser.add_argument("--config", type=Path, default=config_path)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--tolerance-scale", type=float)
    parser.add_argument("--jobs", type=int)
    try:
        args = parser.parse_args(list(overrides or []))
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.config is None:
            if args.experiment is None:
                raise ConfigError("give --config PATH or an experiment kind")
            args.config = shipped_config(DEFAULT_CONFIGS[args.experiment])
        cfg = load_config(args.config)
        if args.experiment is not None and args.experiment != cfg.experiment:
            raise ConfigError(f"{args.config} runs {cfg.experiment}, not {args.experiment}")
        cfgmod.apply_overrides(cfg, seed=args.seed, out=args.out, tolerance_scale=args.tolerance_scale,
                               jobs=args.jobs)
        reports = execute(cfg, log=log)
    except (ConfigError, PreconditionError, InputError) as exc:
        log(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failed = [r for r in reports if not r.passed]
    if failed:
        names = sorted({row.check_name for r in failed for row in r.failures} or {r.name for r in failed})
        log(f"FAILED: {', '.join(names)}")
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    return run(overrides=sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
