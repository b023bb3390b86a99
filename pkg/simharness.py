# simharness.py
# Monte Carlo experiments: repeated estimation on simulated samples, error tables, rate fits and CLT checks.
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import stats
from tqdm import tqdm

import config
from adaptive import GridConfig, build_grid, run_adaptive
from densities import parse_density, sample, tau_sq, theta2
from errors import GridInfeasibleError, InvalidParameterError, MalformedInputError
from estimators import estimate_fixed, fixed_bandwidth_rule
from kernels import get_kernel
from utils import derive_seed, fit_log_slope

logger = logging.getLogger(__name__)

ESTIMATORS = ("fixed_h", "adaptive")
_MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class ExperimentPlan:
    """
    A fully specified Monte Carlo run. With estimator "fixed_h" the bandwidth is
    c * n^(-2 / (4 alpha + 1)) and `method` picks the fixed-bandwidth estimator;
    with "adaptive" the bandwidth comes from the grid selector configured by `grid`.
    """
    density: str
    n_list: Tuple[int, ...]
    replicates: int
    master_seed: int
    kernel: str = config.DEFAULT_KERNEL
    estimator: str = "fixed_h"
    alpha: float = 1.0
    c: float = 1.0
    method: str = "tn"
    grid: GridConfig = field(default_factory=GridConfig)
    ci_level: float = config.DEFAULT_LEVEL

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.replicates < 2:
            raise InvalidParameterError(f"need at least 2 replicates, got {self.replicates}")
        if not self.n_list or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise InvalidParameterError(f"n_list must be non-empty and strictly increasing, got {list(self.n_list)}")
        if self.n_list[0] < 2:
            raise InvalidParameterError("every n must be >= 2")
        if not 0 <= int(self.master_seed) <= _MAX_SEED:
            raise InvalidParameterError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.estimator not in ESTIMATORS:
            raise InvalidParameterError(f"estimator must be one of {ESTIMATORS}, got '{self.estimator}'")
        if self.method not in config.FIXED_METHODS:
            raise InvalidParameterError(f"method must be one of {config.FIXED_METHODS}, got '{self.method}'")
        if not 0.0 < self.ci_level < 1.0:
            raise InvalidParameterError(f"ci_level must be in (0, 1), got {self.ci_level}")
        # fail early on unknown names
        parse_density(self.density)
        get_kernel(self.kernel)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["n_list"] = list(self.n_list)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentPlan":
        data = dict(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidParameterError(f"unknown plan settings: {', '.join(sorted(unknown))}")
        if isinstance(data.get("grid"), dict):
            data["grid"] = GridConfig.from_dict(data["grid"])
        try:
            return cls(**data)
        except TypeError as e:
            raise InvalidParameterError(f"incomplete plan: {e}") from None


@dataclass
class ExperimentRow:
    n: int
    status: str = "ok"
    mean_error: Optional[float] = None
    sd_error: Optional[float] = None
    rmse: Optional[float] = None
    coverage: Optional[float] = None
    mean_h: Optional[float] = None
    median_h: Optional[float] = None
    h_histogram: Dict[str, int] = field(default_factory=dict)
    ks: Optional[float] = None
    ks_reason: Optional[str] = None
    fallback_rate: Optional[float] = None


@dataclass
class ExperimentReport:
    plan: Dict[str, Any]
    rows: List[ExperimentRow]
    rate_slope: Optional[float] = None
    rate_slope_stderr: Optional[float] = None
    adjusted_slope: Optional[float] = None
    adjusted_slope_stderr: Optional[float] = None

    @property
    def ok_rows(self) -> List[ExperimentRow]:
        return [r for r in self.rows if r.status == "ok"]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "plan": self.plan,
            "rows": [asdict(r) for r in self.rows],
            "rate_slope": self.rate_slope,
            "rate_slope_stderr": self.rate_slope_stderr,
            "adjusted_slope": self.adjusted_slope,
            "adjusted_slope_stderr": self.adjusted_slope_stderr,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentReport":
        return cls(plan=data["plan"], rows=[ExperimentRow(**r) for r in data["rows"]],
                   rate_slope=data.get("rate_slope"), rate_slope_stderr=data.get("rate_slope_stderr"),
                   adjusted_slope=data.get("adjusted_slope"),
                   adjusted_slope_stderr=data.get("adjusted_slope_stderr"))


def load_plan(path: str) -> ExperimentPlan:
    """Reads an ExperimentPlan from a JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise MalformedInputError(f"config file '{path}' is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise MalformedInputError(f"config file '{path}' must hold a JSON object")
    return ExperimentPlan.from_dict(data)


# --- Statistics ---

def fit_rate(n_list: Sequence[float], rmse_list: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of log rmse against log n, with its standard error."""
    if len(n_list) < 3:
        raise InvalidParameterError(f"need at least 3 points for a rate fit, got {len(n_list)}")
    return fit_log_slope(n_list, rmse_list)


def fit_adjusted_rate(n_list: Sequence[float], rmse_list: Sequence[float]) -> Tuple[float, float]:
    """Slope of log rmse against log(n / sqrt(log n)), the rate with the adaptation penalty."""
    return fit_rate([n / math.sqrt(math.log(n)) for n in n_list], rmse_list)


def ks_normality(z: Sequence[float]) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of z and the standard normal CDF."""
    z = np.asarray(z, dtype=float)
    if z.size < config.MIN_KS_POINTS:
        raise InvalidParameterError(f"need at least {config.MIN_KS_POINTS} points, got {z.size}")
    return float(stats.kstest(z, "norm").statistic)


# --- Replicates ---

def _replicate(plan: ExperimentPlan, n: int, r: int) -> Tuple[float, bool, float, bool]:
    """One replicate: (error, CI covers theta2, bandwidth, fallback)."""
    d = parse_density(plan.density)
    k = get_kernel(plan.kernel)
    s = sample(d, n, derive_seed(plan.master_seed, n, r))
    if plan.estimator == "adaptive":
        result, _ = run_adaptive(s, k, plan.grid, plan.ci_level, n_jobs=1)
    else:
        h = fixed_bandwidth_rule(n, plan.alpha, plan.c)
        result = estimate_fixed(s, k, h, plan.method, plan.ci_level, n_jobs=1)
    truth = theta2(d)
    covered = result.ci_low <= truth <= result.ci_high
    return result.theta_hat - truth, covered, result.bandwidth, bool(result.fallback)


def _summarize(plan: ExperimentPlan, n: int, outcomes: List[Tuple[float, bool, float, bool]]) -> ExperimentRow:
    d = parse_density(plan.density)
    errors = np.array([o[0] for o in outcomes])
    hs = np.array([o[2] for o in outcomes])
    R = errors.size

    mean_error = math.fsum(errors) / R
    sd_error = math.sqrt(math.fsum((errors - mean_error) ** 2) / (R - 1))
    rmse = math.sqrt(math.fsum(errors * errors) / R)
    coverage = sum(1 for o in outcomes if o[1]) / R
    histogram: Dict[str, int] = {}
    for h in hs:
        key = f"{h:.6g}"
        histogram[key] = histogram.get(key, 0) + 1

    row = ExperimentRow(n=n, mean_error=mean_error, sd_error=sd_error, rmse=rmse, coverage=coverage,
                        mean_h=math.fsum(hs) / R, median_h=float(np.median(hs)), h_histogram=histogram)
    if plan.estimator == "adaptive":
        row.fallback_rate = sum(1 for o in outcomes if o[3]) / R

    # standardized with the true tau^2; coverage above uses tau_sq_hat
    tau = tau_sq(d)
    if tau == 0.0:
        row.ks_reason = "tau_sq = 0"
    elif math.isinf(tau):
        row.ks_reason = "tau_sq infinite"
    elif R < config.MIN_KS_POINTS:
        row.ks_reason = f"fewer than {config.MIN_KS_POINTS} replicates"
    else:
        row.ks = ks_normality(math.sqrt(n) * errors / (2.0 * math.sqrt(tau)))
    return row


def run_experiment(plan: ExperimentPlan, n_jobs: Optional[int] = None, progress: bool = False) -> ExperimentReport:
    """
    Runs every (n, replicate) pair of the plan. Replicate seeds depend only on
    (master_seed, n, r) and results are aggregated in replicate order, so the report
    is identical for any worker count. A grid that is infeasible at some n is
    recorded on that row and the run continues.
    """
    jobs = config.N_JOBS if n_jobs is None else n_jobs
    started = time.perf_counter()
    logger.info("[SIMULATE] %s, %s kernel, %s estimator, n=%s, R=%d", plan.density, plan.kernel,
                plan.estimator, list(plan.n_list), plan.replicates)
    rows: List[ExperimentRow] = []
    for n in tqdm(plan.n_list, desc="simulate", unit="n", file=sys.stderr, disable=not progress):
        if plan.estimator == "adaptive":
            try:
                build_grid(n, plan.grid)
            except GridInfeasibleError as e:
                logger.warning("[SIMULATE] n=%d skipped: %s", n, e)
                rows.append(ExperimentRow(n=n, status=str(e)))
                continue
        if jobs == 1:
            outcomes = [_replicate(plan, n, r) for r in range(plan.replicates)]
        else:
            outcomes = Parallel(n_jobs=jobs)(delayed(_replicate)(plan, n, r) for r in range(plan.replicates))
        rows.append(_summarize(plan, n, outcomes))
        logger.info("-> n=%d done: rmse=%.4g, coverage=%.3f", n, rows[-1].rmse, rows[-1].coverage)

    report = ExperimentReport(plan=plan.to_dict(), rows=rows)
    usable = [r for r in report.ok_rows if r.rmse and r.rmse > 0]
    if len(usable) >= 3:
        ns = [r.n for r in usable]
        rmses = [r.rmse for r in usable]
        report.rate_slope, report.rate_slope_stderr = fit_rate(ns, rmses)
        report.adjusted_slope, report.adjusted_slope_stderr = fit_adjusted_rate(ns, rmses)
    logger.info("[SIMULATE] finished in %.1fs", time.perf_counter() - started)
    return report


# --- Output ---

def _metadata_lines(report: ExperimentReport) -> List[str]:
    plan = report.plan
    grid = plan.get("grid", {})
    lines = [
        f"# density={plan['density']}",
        f"# kernel={plan['kernel']}",
        f"# estimator={plan['estimator']}",
        f"# mode={grid.get('mode')}",
        f"# l_mode={grid.get('l_mode')}",
        f"# seed={plan['master_seed']}",
        f"# replicates={plan['replicates']}",
        f"# ci_level={plan['ci_level']}",
        f"# config={json.dumps(plan, sort_keys=True)}",
        f"# rate_slope={report.rate_slope}",
        f"# adjusted_slope={report.adjusted_slope}",
    ]
    for row in report.rows:
        if row.status != "ok":
            lines.append(f"# n={row.n}: {row.status}")
        elif row.ks_reason:
            lines.append(f"# n={row.n}: ks omitted ({row.ks_reason})")
    return lines


def report_table(report: ExperimentReport) -> pd.DataFrame:
    """The per-n table with the CSV columns."""
    records = [{"n": r.n, "mean_error": r.mean_error, "sd_error": r.sd_error, "rmse": r.rmse,
                "coverage": r.coverage, "mean_h": r.mean_h, "ks": r.ks} for r in report.rows]
    return pd.DataFrame.from_records(records, columns=config.CSV_COLUMNS)


def emit(report: ExperimentReport, fmt: str, path: str) -> None:
    """Writes the report as csv (table plus '#' metadata lines), json or pdf."""
    if fmt not in config.REPORT_FORMATS:
        raise InvalidParameterError(f"format must be one of {config.REPORT_FORMATS}, got '{fmt}'")
    if fmt == "pdf":
        from report_generator import render_report_pdf
        render_report_pdf(report, path)
        return
    if fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    else:
        text = report_table(report).to_csv(index=False, float_format="%.12g", lineterminator="\n")
        text += "\n".join(_metadata_lines(report)) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    logger.info("-> report written to %s (%s)", path, fmt)


def summarize_failures(report: ExperimentReport) -> List[str]:
    """Messages for rows that did not run."""
    return [f"n={r.n}: {r.status}" for r in report.rows if r.status != "ok"]


