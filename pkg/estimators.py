# estimators.py
# Kernel U-statistic estimators of the integral of f0^2, the plug-in CLT variance and confidence intervals.
#
#   T_n(h)     = 2 / (n (n-1) h) * sum_{i<j} K((X_i - X_j) / h)
#   Tbar_n(h)  = 2 / (n (n-1) h) * sum_{i<j} (K*K)((X_i - X_j) / h)
#   BR_n(h)    = 2 T_n(h) - Tbar_n(h)
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

import config
from errors import InvalidBandwidthError, InvalidLevelError, InvalidParameterError, SampleTooSmallError
from kernels import KernelSpec, effective_radius, self_convolution, self_convolution_radius

logger = logging.getLogger(__name__)

# Upper bound on the number of kernel evaluations held in memory per row block.
_BLOCK_CELLS = 1 << 22


@dataclass(frozen=True, eq=False)
class Sample:
    """An immutable vector of n >= 2 finite observations."""
    values: np.ndarray

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "Sample":
        arr = np.array(values, dtype=float).ravel()
        if arr.size < 2:
            raise SampleTooSmallError(f"need n >= 2 observations, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise SampleTooSmallError("sample contains non-finite values")
        arr.setflags(write=False)
        return cls(values=arr)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def sorted_values(self) -> np.ndarray:
        return np.sort(self.values, kind="stable")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Sample) and np.array_equal(self.values, other.values)

    __hash__ = None

    def __len__(self) -> int:
        return self.n


SampleLike = Union[Sample, Iterable[float]]


@dataclass
class EstimateResult:
    """One estimate of the integral of f0^2 with its bandwidth, variance plug-in and CI."""
    theta_hat: float
    bandwidth: float
    tau_sq_hat: float
    n: int
    ci_low: float
    ci_high: float
    level: float
    method: str
    fallback: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["h"] = out.pop("bandwidth")
        out["ci"] = [out.pop("ci_low"), out.pop("ci_high")]
        if out["fallback"] is None:
            out.pop("fallback")
        return out


# --- Input Validation ---

def as_sample(s: SampleLike) -> Sample:
    return s if isinstance(s, Sample) else Sample.from_values(s)


def check_bandwidth(h: float) -> float:
    h = float(h)
    if not (h > 0.0 and math.isfinite(h)):
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h}")
    return h


# --- Pairwise Engine ---

def pairwise_row_sums(x_sorted: np.ndarray, func: Callable[[np.ndarray], np.ndarray],
                      radius: float, h: float, n_jobs: Optional[int] = None) -> np.ndarray:
    """
    Row sums S_i = sum_{j != i} func((x_i - x_j) / h) over a sorted sample.

    `func` must vanish beyond `radius`, so each row only visits the window
    |x_i - x_j| <= radius * h found by binary search. Rows are processed in fixed
    blocks and concatenated in block order, so the output does not depend on n_jobs.
    """
    x = x_sorted
    n = x.size
    if math.isfinite(radius):
        reach = radius * h * (1.0 + 1e-9)
        lo = np.searchsorted(x, x - reach, side="left")
        hi = np.searchsorted(x, x + reach, side="right")
    else:
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, n, dtype=np.int64)
    rows = int(max(8, min(config.ROW_BLOCK, _BLOCK_CELLS // max(n, 1))))

    def _block(a: int) -> np.ndarray:
        b = min(a + rows, n)
        c0, c1 = int(lo[a]), int(hi[b - 1])
        vals = func((x[a:b, None] - x[None, c0:c1]) / h)
        vals[np.arange(b - a), np.arange(a, b) - c0] = 0.0  # diagonal deleted
        return vals.sum(axis=1)

    jobs = config.N_JOBS if n_jobs is None else n_jobs
    starts = range(0, n, rows)
    if jobs == 1 or len(starts) == 1:
        parts = [_block(a) for a in starts]
    else:
        parts = Parallel(n_jobs=jobs, backend="threading")(delayed(_block)(a) for a in starts)
    return np.concatenate(parts)


def _kernel_row_sums(s: Sample, k: KernelSpec, h: float, n_jobs: Optional[int]) -> np.ndarray:
    return pairwise_row_sums(s.sorted_values(), k.pdf_fn, effective_radius(k), h, n_jobs)


def kernel_statistics(s: SampleLike, k: KernelSpec, h: float,
                      n_jobs: Optional[int] = None) -> Tuple[float, float]:
    """T_n(h) and the leave-one-out plug-in tau^2 from a single pass over the pairs."""
    s = as_sample(s)
    h = check_bandwidth(h)
    n = s.n
    row_sums = _kernel_row_sums(s, k, h, n_jobs)
    tn = math.fsum(row_sums) / (n * (n - 1) * h)
    loo = row_sums / ((n - 1) * h)
    tau_sq = math.fsum(loo * loo) / n - tn * tn
    return tn, max(0.0, tau_sq)


# --- Estimators ---

def t_n(s: SampleLike, k: KernelSpec, h: float, n_jobs: Optional[int] = None) -> float:
    """The pairwise U-statistic T_n(h), diagonal deleted."""
    s = as_sample(s)
    h = check_bandwidth(h)
    n = s.n
    return math.fsum(_kernel_row_sums(s, k, h, n_jobs)) / (n * (n - 1) * h)


def t_bar_n(s: SampleLike, k: KernelSpec, h: float, n_jobs: Optional[int] = None) -> float:
    """
    The integrated-square plug-in: the integral of the squared kernel density
    estimate with diagonal terms deleted, computed through (K*K).
    """
    s = as_sample(s)
    h = check_bandwidth(h)
    n = s.n

    def conv(t: np.ndarray) -> np.ndarray:
        return np.asarray(self_convolution(k, t), dtype=float)

    row_sums = pairwise_row_sums(s.sorted_values(), conv, self_convolution_radius(k), h, n_jobs)
    return math.fsum(row_sums) / (n * (n - 1) * h)


def bickel_ritov(s: SampleLike, k: KernelSpec, h: float, n_jobs: Optional[int] = None) -> float:
    """2 T_n(h) - Tbar_n(h)."""
    s = as_sample(s)
    return 2.0 * t_n(s, k, h, n_jobs) - t_bar_n(s, k, h, n_jobs)


def tau_sq_hat(s: SampleLike, k: KernelSpec, h: float, n_jobs: Optional[int] = None) -> float:
    """
    Plug-in estimate of tau^2 = int f^3 - (int f^2)^2: the mean of squared
    leave-one-out density estimates at the data points minus T_n(h)^2, clamped at 0.
    """
    return kernel_statistics(s, k, h, n_jobs)[1]


def confidence_interval(theta_hat: float, tau_sq_hat: float, n: int, level: float) -> Tuple[float, float]:
    """theta_hat +- z_{(1+level)/2} * 2 sqrt(tau_sq_hat) / sqrt(n)."""
    level = float(level)
    if not 0.0 < level < 1.0:
        raise InvalidLevelError(f"confidence level must be in (0, 1), got {level}")
    if tau_sq_hat < 0:
        raise InvalidParameterError(f"tau_sq_hat must be >= 0, got {tau_sq_hat}")
    if n < 2:
        raise SampleTooSmallError(f"need n >= 2 observations, got {n}")
    z = float(stats.norm.ppf(0.5 * (1.0 + level)))
    half = z * 2.0 * math.sqrt(tau_sq_hat) / math.sqrt(n)
    return theta_hat - half, theta_hat + half


def variance_budget(n: int, h: float, L: float, k: KernelSpec, alpha: float) -> float:
    """Shape of the variance envelope: max(1 / (n^2 h), L h^(2 alpha) / n)."""
    h = check_bandwidth(h)
    if n < 2:
        raise SampleTooSmallError(f"need n >= 2 observations, got {n}")
    if not (L > 0 and alpha > 0):
        raise InvalidParameterError(f"need L > 0 and alpha > 0, got L={L}, alpha={alpha}")
    return max(1.0 / (n * n * h), L * h ** (2.0 * alpha) / n)


def fixed_bandwidth_rule(n: int, alpha: float, c: float = 1.0) -> float:
    """The oracle bandwidth c * n^(-2 / (4 alpha + 1)) for a known smoothness alpha."""
    if not (alpha > 0 and c > 0):
        raise InvalidParameterError(f"need alpha > 0 and c > 0, got alpha={alpha}, c={c}")
    return c * float(n) ** (-2.0 / (4.0 * alpha + 1.0))


_FIXED_METHODS: Dict[str, Callable[..., float]] = {
    "tn": t_n,
    "tbar": t_bar_n,
    "bickel_ritov": bickel_ritov,
}


def estimate_fixed(s: SampleLike, k: KernelSpec, h: float, method: str = "tn",
                   level: float = config.DEFAULT_LEVEL, n_jobs: Optional[int] = None) -> EstimateResult:
    """Fixed-bandwidth estimate with a normal-approximation CI built from tau_sq_hat at h."""
    if method not in _FIXED_METHODS:
        raise InvalidParameterError(f"unknown method '{method}'; choose one of {', '.join(_FIXED_METHODS)}")
    s = as_sample(s)
    tn, tau = kernel_statistics(s, k, h, n_jobs)
    theta = tn if method == "tn" else _FIXED_METHODS[method](s, k, h, n_jobs)
    lo, hi = confidence_interval(theta, tau, s.n, level)
    logger.info("-> %s estimate %.6g at h=%.4g (n=%d)", method, theta, h, s.n)
    return EstimateResult(theta_hat=theta, bandwidth=float(h), tau_sq_hat=tau, n=s.n,
                          ci_low=lo, ci_high=hi, level=level, method=method)
