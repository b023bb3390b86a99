# adaptive.py
# Data-driven bandwidth choice: the geometric grid, the thresholds d(h) and sigma~(h, n), and the Lepski-type rule.
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

from joblib import Parallel, delayed

import config
from errors import GridInfeasibleError, InvalidBandwidthError, InvalidParameterError
from estimators import (EstimateResult, SampleLike, as_sample, check_bandwidth, confidence_interval,
                        kernel_statistics, t_n)
from kernels import KernelSpec, l2_norm_sq

logger = logging.getLogger(__name__)

# Relative slack when checking that h lies inside the grid range.
_RANGE_SLACK = 1e-12


@dataclass(frozen=True)
class GridConfig:
    """
    Grid and threshold parameters. `L` is the known bound on the integral of f0^2
    when l_mode == "given"; with l_mode == "estimated" it is replaced by T_n(h_min).
    """
    delta: float = config.DEFAULT_DELTA
    rho: float = config.DEFAULT_RHO
    ell_scale: float = config.DEFAULT_ELL_SCALE
    mode: str = config.DEFAULT_MODE
    l_mode: str = config.DEFAULT_L_MODE
    L: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise InvalidParameterError(f"delta must be in (0, 1), got {self.delta}")
        if not self.rho > 1.0:
            raise InvalidParameterError(f"rho must be > 1, got {self.rho}")
        if not self.ell_scale > 0.0:
            raise InvalidParameterError(f"ell_scale must be > 0, got {self.ell_scale}")
        if self.mode not in config.GRID_MODES:
            raise InvalidParameterError(f"mode must be one of {config.GRID_MODES}, got '{self.mode}'")
        if self.l_mode not in config.L_MODES:
            raise InvalidParameterError(f"l_mode must be one of {config.L_MODES}, got '{self.l_mode}'")
        if self.l_mode == "given" and not (self.L is not None and self.L > 0):
            raise InvalidParameterError("l_mode 'given' needs a bound L > 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        unknown = set(data) - set(known)
        if unknown:
            raise InvalidParameterError(f"unknown grid settings: {', '.join(sorted(unknown))}")
        return cls(**known)


@dataclass(frozen=True)
class BandwidthGrid:
    """The strictly decreasing candidate set h0 > h1 > h2 > h2/rho > ... >= h_lower_bound."""
    bandwidths: Tuple[float, ...]
    n: int
    h_lower_bound: float
    h0: float
    h1: float
    h2: float
    ell: float
    mode: str
    degenerate: bool
    M: Optional[float] = None
    L: Optional[float] = None
    truncated: int = 0

    @property
    def h_min(self) -> float:
        return self.bandwidths[-1]

    def __len__(self) -> int:
        return len(self.bandwidths)

    def with_L(self, k: KernelSpec, L: float) -> "BandwidthGrid":
        """Copy of the grid with M = 144 ||K||_2^2 L resolved."""
        return replace(self, L=float(L), M=threshold_M(k, L))

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["bandwidths"] = list(self.bandwidths)
        return out


@dataclass
class TraceEntry:
    h: float
    g: float
    delta_T: float
    threshold: float
    passed: bool


@dataclass
class SelectionTrace:
    """Every pairwise comparison made by the selector, plus the outcome."""
    tests: List[TraceEntry] = field(default_factory=list)
    t_values: List[float] = field(default_factory=list)
    h_hat: float = math.nan
    fallback: bool = False
    mode: str = config.DEFAULT_MODE
    M: float = math.nan
    L: float = math.nan
    grid: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tests": [{"h": t.h, "g": t.g, "delta_T": t.delta_T, "threshold": t.threshold, "pass": t.passed}
                      for t in self.tests],
            "t_values": list(self.t_values),
            "h_hat": self.h_hat,
            "fallback": self.fallback,
            "mode": self.mode,
            "M": self.M,
            "L": self.L,
            "grid": list(self.grid),
        }


# --- Grid Construction ---

def ell(n: int, scale: float = config.DEFAULT_ELL_SCALE) -> float:
    """l(n) = scale / log log n: tends to 0 while l(n) log n tends to infinity."""
    return scale / math.log(math.log(n))


def grid_size_bound(n: int, rho: float) -> float:
    return 3.0 + math.log(n) / math.log(rho)


def build_grid(n: int, cfg: GridConfig, k: Optional[KernelSpec] = None) -> BandwidthGrid:
    """
    Builds h0 = n^-(1-delta), h1 = log n / n, h2 = l(n) / n and the geometric tail
    h2 / rho^k down to the floor ((log n)^4 / n^2 in paper mode, 1 / n^2 in practical
    mode). M is resolved when both a kernel and a given L are available.
    """
    n = int(n)
    if n < 8:
        raise GridInfeasibleError(f"grid infeasible: need n >= 8 so that log log n > 0, got n={n}")
    log_n = math.log(n)
    ell_n = ell(n, cfg.ell_scale)
    h0 = float(n) ** (-(1.0 - cfg.delta))
    h1 = log_n / n
    h2 = ell_n / n

    # 1. Ordering h0 > h1 > h2
    if not h0 > h1:
        raise GridInfeasibleError(
            f"grid infeasible: need n^delta > log n (n^delta = {n ** cfg.delta:.4g}, log n = {log_n:.4g})")
    if not h1 > h2:
        raise GridInfeasibleError(
            f"grid infeasible: need l(n) < log n (l(n) = {ell_n:.4g}, log n = {log_n:.4g})")

    # 2. Floor of the bandwidth range
    lower = log_n ** 4 / float(n) ** 2 if cfg.mode == "paper" else 1.0 / float(n) ** 2
    if h0 < lower:
        raise GridInfeasibleError(
            f"grid infeasible: h0 = {h0:.4g} lies below the lower bound {lower:.4g}")

    # 3. Geometric tail below h2
    bandwidths = [h for h in (h0, h1, h2) if h >= lower]
    step = 1
    while h2 / cfg.rho ** step >= lower:
        bandwidths.append(h2 / cfg.rho ** step)
        step += 1

    cap = int(math.floor(grid_size_bound(n, cfg.rho)))
    truncated = max(0, len(bandwidths) - cap)
    if truncated:
        logger.info("[GRID] dropping %d smallest bandwidths to respect the size bound %d", truncated, cap)
        bandwidths = bandwidths[:cap]

    grid = BandwidthGrid(
        bandwidths=tuple(bandwidths), n=n, h_lower_bound=lower, h0=h0, h1=h1, h2=h2, ell=ell_n,
        mode=cfg.mode, degenerate=len(bandwidths) <= 3, truncated=truncated,
    )
    if k is not None and cfg.l_mode == "given":
        grid = grid.with_L(k, cfg.L)
    logger.debug("-> grid built: %d bandwidths in [%.4g, %.4g] (%s mode)", len(grid), grid.h_min, h0, cfg.mode)
    return grid


# --- Thresholds ---

def sigma_tilde(h: float, n: int) -> float:
    """sigma~(h, n) = 1 / (n sqrt(h))."""
    h = check_bandwidth(h)
    return 1.0 / (n * math.sqrt(h))


def threshold_M(k: KernelSpec, L: float) -> float:
    """M = 144 ||K||_2^2 L."""
    if not (L is not None and L > 0 and math.isfinite(L)):
        raise InvalidParameterError(f"L must be positive and finite, got {L}")
    return config.THRESHOLD_FACTOR * l2_norm_sq(k) * float(L)


def threshold_d(h: float, grid: BandwidthGrid, n: int) -> float:
    """
    d(h) = sqrt(2 M log(h0 / h)) below h2 and l(n)^(-1/2) on [h2, h0].
    Only defined on the grid range [h_lower_bound, h0].
    """
    h = check_bandwidth(h)
    if n != grid.n:
        raise InvalidParameterError(f"grid was built for n={grid.n}, not n={n}")
    if h < grid.h_lower_bound * (1.0 - _RANGE_SLACK) or h > grid.h0 * (1.0 + _RANGE_SLACK):
        raise InvalidBandwidthError(f"h = {h:.4g} outside the grid range [{grid.h_lower_bound:.4g}, {grid.h0:.4g}]")
    if h >= grid.h2:
        return grid.ell ** -0.5
    if grid.M is None:
        raise InvalidParameterError("threshold M is unresolved; call with_L on the grid first")
    return math.sqrt(2.0 * grid.M * math.log(grid.h0 / h))


# --- Selection ---

def _grid_t_values(s, k: KernelSpec, grid: BandwidthGrid, n_jobs: Optional[int]) -> List[float]:
    jobs = config.N_JOBS if n_jobs is None else n_jobs
    if jobs == 1:
        return [t_n(s, k, h, n_jobs=1) for h in grid.bandwidths]
    return Parallel(n_jobs=jobs, backend="threading")(delayed(t_n)(s, k, h, 1) for h in grid.bandwidths)


def select_bandwidth(s: SampleLike, k: KernelSpec, grid: BandwidthGrid,
                     n_jobs: Optional[int] = None) -> Tuple[float, SelectionTrace]:
    """
    Returns the largest grid bandwidth h with |T_n(h) - T_n(g)| <= sigma~(g, n) d(g)
    for every smaller grid element g, and the full comparison trace.

    The smallest element passes vacuously. It is a regular answer only for a
    one-element grid; otherwise no element passed and it is returned with
    trace.fallback = True.
    """
    s = as_sample(s)
    n = s.n
    if grid.n != n:
        raise InvalidParameterError(f"grid was built for n={grid.n}, sample has n={n}")
    if grid.M is None and any(h < grid.h2 for h in grid.bandwidths):
        raise InvalidParameterError("threshold M is unresolved; call with_L on the grid first")

    bandwidths = list(grid.bandwidths)
    m = len(bandwidths)
    t_values = _grid_t_values(s, k, grid, n_jobs)
    bars = [sigma_tilde(g, n) * threshold_d(g, grid, n) for g in bandwidths]

    trace = SelectionTrace(t_values=list(t_values), mode=grid.mode, grid=bandwidths,
                           M=grid.M if grid.M is not None else math.nan,
                           L=grid.L if grid.L is not None else math.nan)
    passes = []
    for i, h in enumerate(bandwidths):
        ok = True
        for j in range(i + 1, m):
            diff = abs(t_values[i] - t_values[j])
            passed = diff <= bars[j]
            trace.tests.append(TraceEntry(h=h, g=bandwidths[j], delta_T=diff, threshold=bars[j], passed=passed))
            ok = ok and passed
        passes.append(ok)

    chosen = next((i for i in range(m) if passes[i] and (i < m - 1 or m == 1)), None)
    if chosen is None:
        chosen = m - 1
        trace.fallback = True
        logger.warning("[SELECT] no grid bandwidth passed its tests; falling back to h_min = %.4g", bandwidths[-1])
    trace.h_hat = bandwidths[chosen]
    logger.info("[SELECT] h_hat = %.4g (element %d of %d)", trace.h_hat, chosen, m)
    return trace.h_hat, trace


def l_estimation_bandwidth(grid: BandwidthGrid) -> float:
    """
    Smallest grid bandwidth not below (log n)^4 / n^2. Equals h_min on paper-mode grids;
    practical grids go down to 1 / n^2, where T_n is too noisy to bound anything.
    """
    floor = math.log(grid.n) ** 4 / float(grid.n) ** 2
    eligible = [h for h in grid.bandwidths if h >= floor]
    return eligible[-1] if eligible else grid.h_min


def estimate_L(s: SampleLike, k: KernelSpec, grid: BandwidthGrid, n_jobs: Optional[int] = None) -> float:
    """Estimates the bound L on the integral of f0^2 by T_n at the small end of the grid, clamped at L_FLOOR."""
    return max(t_n(s, k, l_estimation_bandwidth(grid), n_jobs), config.L_FLOOR)


def run_adaptive(s: SampleLike, k: KernelSpec, cfg: GridConfig, level: float = config.DEFAULT_LEVEL,
                 n_jobs: Optional[int] = None) -> Tuple[EstimateResult, SelectionTrace]:
    """Adaptive estimate together with its selection trace."""
    s = as_sample(s)

    # 1. Grid and threshold constant
    grid = build_grid(s.n, cfg, k)
    if cfg.l_mode == "estimated":
        L = estimate_L(s, k, grid, n_jobs)
        grid = grid.with_L(k, L)
        logger.info("-> estimated L = %.4g from T_n(h_min)", L)

    # 2. Bandwidth selection
    h_hat, trace = select_bandwidth(s, k, grid, n_jobs)

    # 3. Estimate and interval at the selected bandwidth
    theta, tau = kernel_statistics(s, k, h_hat, n_jobs)
    lo, hi = confidence_interval(theta, tau, s.n, level)
    result = EstimateResult(theta_hat=theta, bandwidth=h_hat, tau_sq_hat=tau, n=s.n, ci_low=lo, ci_high=hi,
                            level=level, method="adaptive", fallback=trace.fallback)
    return result, trace


def adaptive_estimate(s: SampleLike, k: KernelSpec, cfg: GridConfig, level: float = config.DEFAULT_LEVEL,
                      n_jobs: Optional[int] = None) -> EstimateResult:
    """T_n at the data-driven bandwidth, with tau_sq_hat and the CI evaluated there."""
    return run_adaptive(s, k, cfg, level, n_jobs)[0]
