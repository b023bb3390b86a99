# oracle.py
# Independent references for the optimized estimators: a brute-force T_n, exact expectations by
# quadrature over the autocorrelation, the Hoeffding projections and the smoothing-error envelopes.
#
# Everything here is deterministic and slow on purpose; the test-suite compares the fast paths to it.
import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from densities import TestDensity, autocorrelation, characteristic_abs_sq, theta2
from errors import DegenerateRateFitError, InvalidParameterError
from estimators import SampleLike, as_sample, check_bandwidth
from kernels import KernelSpec, effective_radius, l2_norm_sq, self_convolution, self_convolution_radius
from utils import fit_log_slope, quad_checked

logger = logging.getLogger(__name__)

# Biases below this fraction of theta2 are treated as numerically zero by the rate fit.
_ZERO_BIAS = 1e-13


@dataclass
class RateFitResult:
    """Slope of log|bias| against log h, with the points left out of the fit."""
    slope: float
    stderr: float
    h_used: List[float] = field(default_factory=list)
    biases: List[float] = field(default_factory=list)
    excluded: List[float] = field(default_factory=list)


@dataclass
class DecayResult:
    h_list: List[float]
    lhs: List[float]
    ise: List[float]
    slope: float
    stderr: float
    monotone: bool


# --- Brute Force ---

def t_n_naive(s: SampleLike, k: KernelSpec, h: float) -> float:
    """Literal double loop over i < j with plain left-to-right summation."""
    s = as_sample(s)
    h = check_bandwidth(h)
    x = s.values
    n = s.n
    total = 0.0
    for i in range(n - 1):
        row = k.pdf_fn((x[i] - x[i + 1:]) / h)
        for value in row:
            total += float(value)
    return 2.0 * total / (n * (n - 1) * h)


def self_convolution_numeric(k: KernelSpec, t: float) -> float:
    """(K * K)(t) by direct quadrature, ignoring any closed form the kernel carries."""
    t = float(t)

    def integrand(u: float) -> float:
        return float(k.pdf_fn(np.asarray(u)) * k.pdf_fn(np.asarray(t - u)))

    r = effective_radius(k)
    lo, hi = max(-r, t - r), min(r, t + r)
    if lo >= hi:
        return 0.0
    if not math.isfinite(hi - lo):
        return quad_checked(integrand, -math.inf, math.inf)
    inner = sorted({p for p in (0.0, t, t - r, t + r, -r, r) if lo < p < hi})
    return quad_checked(integrand, lo, hi, points=inner or None)


# --- Quadrature Helpers ---

def _kernel_upper(k: KernelSpec, convolved: bool = False) -> float:
    r = self_convolution_radius(k) if convolved else effective_radius(k)
    if not math.isfinite(r):
        raise InvalidParameterError(f"kernel '{k.name}' has no finite effective radius")
    return r


def _autocorrelation_kinks(d: TestDensity, h: float, upper: float) -> List[float]:
    """Values of u in (0, upper) where A(u h) may fail to be smooth."""
    gaps = {abs(a - b) for a in d.breakpoints for b in d.breakpoints if a != b}
    return sorted(g / h for g in gaps if 0.0 < g / h < upper)


def _even_bias_integral(d: TestDensity, weight, h: float, upper: float, kinks: Sequence[float]) -> float:
    """2 * integral over [0, upper] of weight(u) (A(u h) - A(0)) du, for an even weight."""
    a0 = autocorrelation(d, 0.0)

    def integrand(u: float) -> float:
        return float(weight(u)) * (autocorrelation(d, u * h) - a0)

    points = sorted(set(kinks) | {p for p in (1.0, 2.0) if p < upper})
    return 2.0 * quad_checked(integrand, 0.0, upper, points=points or None)


def _integrate_over_density(d: TestDensity, func) -> float:
    """Integral of func over the support of d, split at the density's breakpoints."""
    lo, hi = d.support
    cuts = [lo] + [b for b in d.breakpoints if lo < b < hi] + [hi]
    return math.fsum(quad_checked(func, a, b) for a, b in zip(cuts[:-1], cuts[1:]) if a < b)


def _is_gaussian_pair(d: TestDensity, k: KernelSpec) -> bool:
    return d.name == "gaussian" and k.name == "gaussian"


# --- Exact Expectations ---

def expected_tn_exact(d: TestDensity, k: KernelSpec, h: float) -> float:
    """
    E T_n(h) = integral of K(u) A(u h) du with A the autocorrelation of f0.
    Computed as theta2 plus the bias integral; closed form (2 pi (2 sigma^2 + h^2))^(-1/2)
    for a gaussian density with the gaussian kernel.
    """
    h = check_bandwidth(h)
    if _is_gaussian_pair(d, k):
        sigma = d.params["sigma"]
        return 1.0 / math.sqrt(2.0 * math.pi * (2.0 * sigma * sigma + h * h))
    upper = _kernel_upper(k)
    bias = _even_bias_integral(d, lambda u: k.pdf_fn(np.asarray(u)), h, upper,
                               _autocorrelation_kinks(d, h, upper))
    return theta2(d) + bias


def expected_tbar_exact(d: TestDensity, k: KernelSpec, h: float) -> float:
    """E Tbar_n(h) = integral of (K * K)(t) A(t h) dt."""
    h = check_bandwidth(h)
    if _is_gaussian_pair(d, k):
        sigma = d.params["sigma"]
        return 1.0 / math.sqrt(2.0 * math.pi * (2.0 * sigma * sigma + 2.0 * h * h))
    upper = _kernel_upper(k, convolved=True)
    bias = _even_bias_integral(d, lambda t: self_convolution(k, t), h, upper,
                               _autocorrelation_kinks(d, h, upper))
    return theta2(d) + bias


def smoothing_ise(d: TestDensity, k: KernelSpec, h: float) -> float:
    """
    Integrated squared smoothing error of K_h * f0 against f0. Equals
    E Tbar_n - 2 E T_n + theta2, evaluated as one integral against (K*K) - 2K.
    """
    h = check_bandwidth(h)
    if _is_gaussian_pair(d, k):
        return expected_tbar_exact(d, k, h) - 2.0 * expected_tn_exact(d, k, h) + theta2(d)
    upper = _kernel_upper(k, convolved=True)

    def weight(t: float) -> float:
        return self_convolution(k, t) - 2.0 * float(k.pdf_fn(np.asarray(t)))

    value = _even_bias_integral(d, weight, h, upper, _autocorrelation_kinks(d, h, upper))
    return max(0.0, value)


# --- Bias Law ---

def bias_slope(h_list: Sequence[float], biases: Sequence[float], scale: float = 1.0) -> RateFitResult:
    """
    Fits log|bias| against log h. Points with |bias| <= 1e-13 * scale are excluded and
    reported; a fit left with fewer than two points, or with constant |bias|, is degenerate.
    """
    hs = [float(h) for h in h_list]
    bs = [float(b) for b in biases]
    if len(hs) != len(bs):
        raise InvalidParameterError("h_list and biases differ in length")
    if any(h <= 0 for h in hs):
        raise InvalidParameterError("bandwidths must be positive")

    keep = [(h, b) for h, b in zip(hs, bs) if abs(b) > _ZERO_BIAS * scale]
    excluded = [h for h, b in zip(hs, bs) if abs(b) <= _ZERO_BIAS * scale]
    if excluded:
        logger.warning("[BIAS] %d bandwidths have a numerically zero bias and are excluded: %s",
                       len(excluded), excluded)
    if len(keep) < 2:
        raise DegenerateRateFitError(f"bias is numerically zero at {len(excluded)} of {len(hs)} bandwidths")
    mags = np.abs([b for _, b in keep])
    if np.ptp(np.log(mags)) < 1e-12:
        raise DegenerateRateFitError("bias is constant across bandwidths; no rate to fit")

    slope, stderr = fit_log_slope([h for h, _ in keep], mags)
    return RateFitResult(slope=slope, stderr=stderr, h_used=[h for h, _ in keep],
                       biases=[b for _, b in keep], excluded=excluded)


def bias_rate_probe(d: TestDensity, k: KernelSpec, h_list: Sequence[float]) -> RateFitResult:
    """Empirical exponent of the bias E T_n(h) - theta2 over a log-spaced bandwidth list."""
    if len(h_list) < 4:
        raise InvalidParameterError(f"need at least 4 bandwidths, got {len(h_list)}")
    biases = [expected_tn_exact(d, k, h) - theta2(d) for h in h_list]
    result = bias_slope(h_list, biases, scale=theta2(d))
    logger.info("[BIAS] %s / %s: bias slope %.4f (stderr %.2g)", d.spec, k.name, result.slope, result.stderr)
    return result


def autocorrelation_ratio(d: TestDensity, t: float, alpha: float) -> float:
    """|A(t) - A(0)| / |t|^(2 alpha) for the autocorrelation A; bounded in t when f0 is in H_2^alpha."""
    t = float(t)
    if t == 0:
        raise InvalidParameterError("autocorrelation ratio is undefined at t = 0")
    if not 0.0 < alpha <= 0.5:
        raise InvalidParameterError(f"alpha must be in (0, 1/2], got {alpha}")
    return abs(autocorrelation(d, t) - autocorrelation(d, 0.0)) / abs(t) ** (2.0 * alpha)


def sobolev_energy(d: TestDensity, alpha: float, u_max: float) -> float:
    """
    Truncated Sobolev energy: integral over |u| <= u_max of |F f0(u)|^2 (1 + u^2)^alpha.
    Stays bounded as u_max grows exactly when alpha is below the density's Sobolev order.
    """
    if alpha < 0 or u_max <= 0:
        raise InvalidParameterError("need alpha >= 0 and u_max > 0")
    return 2.0 * quad_checked(lambda u: characteristic_abs_sq(d, u) * (1.0 + u * u) ** alpha, 0.0, float(u_max))


# --- Hoeffding Decomposition ---

def smoothed_density(d: TestDensity, k: KernelSpec, h: float, x):
    """(K_h * f0)(x), the first projection of R(x, y) = K_h(x - y) plus E R."""
    h = check_bandwidth(h)
    xs = np.asarray(x, dtype=float)
    if k.name == "box":
        values = (d.cdf_fn(xs + h) - d.cdf_fn(xs - h)) / (2.0 * h)
    elif k.name == "gaussian" and d.name in ("gaussian", "mixture"):
        if d.name == "gaussian":
            parts = [(1.0, d.params["mu"], d.params["sigma"] ** 2)]
        else:
            w = d.params["w"]
            parts = [(w, d.params["mu1"], d.params["sigma1"] ** 2), (1.0 - w, d.params["mu2"], d.params["sigma2"] ** 2)]
        values = sum(wk * np.exp(-(xs - m) ** 2 / (2.0 * (v + h * h))) / np.sqrt(2.0 * np.pi * (v + h * h))
                     for wk, m, v in parts)
    else:
        r = _kernel_upper(k)

        def one(point: float) -> float:
            inner = sorted({(point - b) / h for b in d.breakpoints if -r < (point - b) / h < r} | {0.0})
            return quad_checked(lambda u: float(k.pdf_fn(np.asarray(u)) * d.pdf_fn(np.asarray(point - u * h))),
                                -r, r, points=inner)

        values = np.vectorize(one, otypes=[float])(xs)
    return float(values) if np.ndim(values) == 0 else values


def _pair_terms(x: np.ndarray, k: KernelSpec, h: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """R(X_i, X_j) for i < j together with the row and column indices."""
    rows, cols = np.triu_indices(x.size, k=1)
    return k.pdf_fn((x[rows] - x[cols]) / h) / h, rows, cols


def degenerate_part(s: SampleLike, d: TestDensity, k: KernelSpec, h: float) -> float:
    """U_n^(2)(pi_2 R) with pi_2 R(x, y) = R(x, y) - m(x) - m(y) + E R and m = K_h * f0."""
    s = as_sample(s)
    h = check_bandwidth(h)
    x = s.values
    er = expected_tn_exact(d, k, h)
    m = np.asarray(smoothed_density(d, k, h, x), dtype=float).reshape(-1)
    r, rows, cols = _pair_terms(x, k, h)
    return math.fsum(r - m[rows] - m[cols] + er) / r.size


def hoeffding_check(s: SampleLike, d: TestDensity, k: KernelSpec, h: float) -> float:
    """
    Residual |lhs - rhs| of U_n^(2)(R - E R) = 2 U_n^(1)(pi_1 R) + U_n^(2)(pi_2 R), every
    term evaluated literally from its definition with the projections computed against f0.
    """
    s = as_sample(s)
    h = check_bandwidth(h)
    x = s.values
    er = expected_tn_exact(d, k, h)
    m = np.asarray(smoothed_density(d, k, h, x), dtype=float).reshape(-1)
    r, rows, cols = _pair_terms(x, k, h)
    lhs = math.fsum(r - er) / r.size
    linear = 2.0 * math.fsum(m - er) / x.size
    degenerate = math.fsum(r - m[rows] - m[cols] + er) / r.size
    residual = abs(lhs - (linear + degenerate))
    logger.debug("[HOEFFDING] n=%d h=%.4g lhs=%.6g residual=%.3g", x.size, h, lhs, residual)
    return residual


def degenerate_variance_bound(d: TestDensity, k: KernelSpec, h: float, n: int) -> float:
    """2 ||f0||_2^2 ||K||_2^2 / (n (n-1) h), the bound on the variance of the degenerate part."""
    h = check_bandwidth(h)
    return 2.0 * theta2(d) * l2_norm_sq(k) / (n * (n - 1) * h)


# --- Linear Part ---

def linear_part_variance_check(d: TestDensity, k: KernelSpec, h: float, n: int) -> Tuple[float, float]:
    """
    lhs = E[2 (K_h * f0)(X) - 2 f0(X)]^2, the bound on n E S_1^2 that goes to 0 with h;
    rhs = 4 ||f0||_inf ||K_h * f0 - f0||_2^2 (infinite for unbounded densities).
    """
    h = check_bandwidth(h)
    if n < 2:
        raise InvalidParameterError(f"need n >= 2, got {n}")

    def integrand(x: float) -> float:
        fx = float(d.pdf_fn(np.asarray(x)))
        if fx == 0.0 or not math.isfinite(fx):
            return 0.0
        diff = 2.0 * smoothed_density(d, k, h, x) - 2.0 * fx
        return diff * diff * fx

    lhs = _integrate_over_density(d, integrand)
    rhs = 4.0 * d.sup_norm * smoothing_ise(d, k, h)
    return lhs, rhs


def linear_part_decay(d: TestDensity, k: KernelSpec, h_list: Sequence[float], n: int = 2) -> DecayResult:
    """
    Evaluates the linear-part bound and the smoothing error over a decreasing bandwidth list.
    `monotone` requires lhs(h) to shrink along the list with lhs(h_min) <= 0.01 lhs(h_max); the
    slope is that of log ||K_h * f0 - f0||_2^2 against log h.
    """
    hs = sorted((float(h) for h in h_list), reverse=True)
    if len(hs) < 2:
        raise InvalidParameterError("need at least two bandwidths")
    lhs = [linear_part_variance_check(d, k, h, n)[0] for h in hs]
    ise = [smoothing_ise(d, k, h) for h in hs]
    monotone = all(b <= a for a, b in zip(lhs, lhs[1:])) and lhs[-1] <= 0.01 * lhs[0]
    slope, stderr = fit_log_slope(hs, ise)
    return DecayResult(h_list=hs, lhs=lhs, ise=ise, slope=slope, stderr=stderr, monotone=monotone)
