# cli.py
# Command-line front end: estimate on a data file, run Monte Carlo plans, inspect bandwidth grids.
import argparse
import dataclasses
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import config
from adaptive import GridConfig, build_grid, run_adaptive, sigma_tilde, threshold_d
from errors import (EstimationError, GridInfeasibleError, InvalidBandwidthError, InvalidLevelError,
                    InvalidParameterError, MalformedInputError, SampleTooSmallError)
from estimators import estimate_fixed
from kernels import get_kernel, kernel_names
from sample_loader import load_sample
from simharness import ESTIMATORS, ExperimentPlan, emit, load_plan, run_experiment, summarize_failures
from utils import setup_logging

logger = logging.getLogger(__name__)


def _exit_code(error: EstimationError) -> int:
    if isinstance(error, GridInfeasibleError):
        return config.EXIT_GRID_INFEASIBLE
    if isinstance(error, SampleTooSmallError):
        return config.EXIT_SAMPLE_TOO_SMALL
    if isinstance(error, (MalformedInputError, InvalidParameterError, InvalidBandwidthError, InvalidLevelError)):
        return config.EXIT_BAD_INPUT
    return config.EXIT_FATAL


def _print_json(payload: Dict[str, Any], pretty: bool = True) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2 if pretty else None)
    sys.stdout.write(text + "\n")


# --- Argument Parsing ---

def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: QFE_THREADS or 1)")
    p.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                   help="log level for standard error")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=config.GRID_MODES, default=config.DEFAULT_MODE)
    p.add_argument("--delta", type=float, default=config.DEFAULT_DELTA)
    p.add_argument("--rho", type=float, default=config.DEFAULT_RHO)
    p.add_argument("--ell-scale", type=float, default=config.DEFAULT_ELL_SCALE)
    p.add_argument("--l-mode", choices=config.L_MODES, default=None,
                   help="'given' needs --L; defaults to 'given' when --L is set, else 'estimated'")
    p.add_argument("--L", type=float, default=None, dest="L", help="bound on the integral of f^2")


def _grid_config(args: argparse.Namespace) -> GridConfig:
    l_mode = args.l_mode or ("given" if args.L is not None else config.DEFAULT_L_MODE)
    return GridConfig(delta=args.delta, rho=args.rho, ell_scale=args.ell_scale, mode=args.mode,
                      l_mode=l_mode, L=args.L)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfe", description="Kernel estimation of the integral of a squared density.")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate from a data file")
    est.add_argument("input", help="one number per line, or a single-column CSV with a header")
    est.add_argument("--kernel", choices=kernel_names(), default=config.DEFAULT_KERNEL)
    bw = est.add_mutually_exclusive_group(required=True)
    bw.add_argument("--h", type=float, help="fixed bandwidth")
    bw.add_argument("--adaptive", action="store_true", help="data-driven bandwidth from the grid selector")
    est.add_argument("--method", choices=config.FIXED_METHODS, default="tn", help="fixed-bandwidth estimator")
    est.add_argument("--level", type=float, default=config.DEFAULT_LEVEL)
    est.add_argument("--trace", action="store_true", help="include the selection trace (adaptive only)")
    _add_grid_flags(est)
    _add_common_flags(est)

    sim = sub.add_parser("simulate", help="run a Monte Carlo plan")
    sim.add_argument("--config", dest="plan_file", default=None, help="JSON plan; --seed overrides its seed")
    sim.add_argument("--density", default=None, help='density specifier, e.g. "cusp:gamma=-0.3"')
    sim.add_argument("--kernel", choices=kernel_names(), default=config.DEFAULT_KERNEL)
    sim.add_argument("--estimator", choices=ESTIMATORS, default="fixed_h")
    sim.add_argument("--alpha", type=float, default=1.0, help="smoothness used by the fixed-h rule")
    sim.add_argument("--c", type=float, default=1.0, help="constant of the fixed-h rule")
    sim.add_argument("--method", choices=config.FIXED_METHODS, default="tn")
    sim.add_argument("--n-list", default=None, help="comma separated, strictly increasing")
    sim.add_argument("--replicates", type=int, default=config.DEFAULT_REPLICATES)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--level", type=float, default=config.DEFAULT_LEVEL)
    sim.add_argument("--format", choices=config.REPORT_FORMATS, default="csv")
    sim.add_argument("--output", required=True)
    sim.add_argument("--progress", action="store_true", help="progress bar on standard error")
    _add_grid_flags(sim)
    _add_common_flags(sim)

    grid = sub.add_parser("grid", help="print the bandwidth grid and thresholds for a sample size")
    grid.add_argument("--n", type=int, required=True)
    grid.add_argument("--kernel", choices=kernel_names(), default=config.DEFAULT_KERNEL)
    grid.add_argument("--json", action="store_true", help="single-line JSON output")
    _add_grid_flags(grid)
    _add_common_flags(grid)
    return parser


# --- Subcommands ---

def cmd_estimate(args: argparse.Namespace) -> int:
    k = get_kernel(args.kernel)
    s = load_sample(args.input)
    resolved: Dict[str, Any] = {"input": args.input, "kernel": k.name, "level": args.level}
    if args.adaptive:
        cfg = _grid_config(args)
        result, trace = run_adaptive(s, k, cfg, args.level, args.threads)
        resolved["grid"] = cfg.to_dict()
        payload = result.to_dict()
        if args.trace:
            payload["trace"] = trace.to_dict()
    else:
        result = estimate_fixed(s, k, args.h, args.method, args.level, args.threads)
        resolved.update({"h": args.h, "method": args.method})
        payload = result.to_dict()
    payload["config"] = resolved
    _print_json(payload)
    return config.EXIT_OK


def _parse_n_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise InvalidParameterError(f"--n-list must be comma separated integers, got '{text}'") from None


def _plan_from_args(args: argparse.Namespace) -> ExperimentPlan:
    if args.plan_file:
        plan = load_plan(args.plan_file)
        if args.seed is not None:
            plan = dataclasses.replace(plan, master_seed=args.seed)
        return plan
    if args.seed is None:
        raise InvalidParameterError("simulate needs --seed (or a plan file with master_seed)")
    if not args.density or not args.n_list:
        raise InvalidParameterError("simulate needs --density and --n-list (or --config)")
    return ExperimentPlan(
        density=args.density, n_list=_parse_n_list(args.n_list), replicates=args.replicates,
        master_seed=args.seed, kernel=args.kernel, estimator=args.estimator, alpha=args.alpha,
        c=args.c, method=args.method, grid=_grid_config(args), ci_level=args.level,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    plan = _plan_from_args(args)
    report = run_experiment(plan, n_jobs=args.threads, progress=args.progress)
    emit(report, args.format, args.output)
    for message in summarize_failures(report):
        sys.stderr.write(f"[WARNING] {message}\n")
    if not report.ok_rows:
        sys.stderr.write("[ERROR] no sample size could be simulated\n")
        return config.EXIT_GRID_INFEASIBLE
    return config.EXIT_OK


def grid_summary(n: int, cfg: GridConfig, kernel: str) -> Dict[str, Any]:
    """The grid with d(h), sigma~(h, n) and their product at every element."""
    k = get_kernel(kernel)
    grid = build_grid(n, cfg, k)
    elements = []
    for h in grid.bandwidths:
        d = None if (grid.M is None and h < grid.h2) else threshold_d(h, grid, n)
        sig = sigma_tilde(h, n)
        elements.append({"h": h, "d": d, "sigma_tilde": sig, "threshold": None if d is None else d * sig})
    return {
        "feasible": True, "n": n, "mode": grid.mode, "kernel": k.name, "M": grid.M, "L": grid.L,
        "h0": grid.h0, "h1": grid.h1, "h2": grid.h2, "ell": grid.ell, "h_lower_bound": grid.h_lower_bound,
        "size": len(grid), "degenerate": grid.degenerate, "truncated": grid.truncated,
        "elements": elements, "config": cfg.to_dict(),
    }


def _fmt_optional(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.6g}"


def cmd_grid(args: argparse.Namespace) -> int:
    cfg = _grid_config(args)
    try:
        summary = grid_summary(args.n, cfg, args.kernel)
    except GridInfeasibleError as e:
        if args.json:
            _print_json({"feasible": False, "n": args.n, "reason": str(e), "config": cfg.to_dict()}, pretty=False)
        raise
    if args.json:
        _print_json(summary, pretty=False)
        return config.EXIT_OK
    out = sys.stdout
    out.write(f"n = {summary['n']}  mode = {summary['mode']}  kernel = {summary['kernel']}\n")
    out.write(f"h0 = {summary['h0']:.6g}  h1 = {summary['h1']:.6g}  h2 = {summary['h2']:.6g}  "
              f"lower bound = {summary['h_lower_bound']:.6g}\n")
    out.write(f"M = {_fmt_optional(summary['M'])}  size = {summary['size']}  "
              f"degenerate = {summary['degenerate']}  truncated = {summary['truncated']}\n")
    if summary["M"] is None:
        out.write("d(h) below h2 needs M; pass --L to resolve it\n")
    out.write(f"{'h':>14} {'d(h)':>12} {'sigma~':>12} {'threshold':>12}\n")
    for e in summary["elements"]:
        out.write(f"{e['h']:>14.6g} {_fmt_optional(e['d']):>12} {e['sigma_tilde']:>12.6g} "
                  f"{_fmt_optional(e['threshold']):>12}\n")
    out.write("feasible\n")
    return config.EXIT_OK


_COMMANDS = {"estimate": cmd_estimate, "simulate": cmd_simulate, "grid": cmd_grid}


def main(argv: Optional[List[str]] = None) -> int:
    """Parses arguments, runs the subcommand and maps domain errors to exit codes."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or config.LOG_LEVEL)
    if args.threads is not None and args.threads < 1:
        sys.stderr.write("[ERROR] --threads must be >= 1\n")
        return config.EXIT_BAD_INPUT
    try:
        return _COMMANDS[args.command](args)
    except EstimationError as e:
        sys.stderr.write(f"[ERROR] {e}\n")
        return _exit_code(e)
