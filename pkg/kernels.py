# kernels.py
# Symmetric, bounded, unit-mass kernels with their exact norms, moments and self-convolutions.
#
# Conventions:
#   K_h(x) = K(x / h) / h
#   (K * K)(t) = integral of K(u) K(t - u) du
# Compact supports are closed, so the box kernel equals 1/2 at u = +-1.
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np
from scipy import special

from errors import DivergenceError, InvalidBandwidthError, InvalidParameterError
from utils import quad_checked

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_INV_2_SQRT_PI = 1.0 / (2.0 * math.sqrt(math.pi))
# exp(-u^2 / 2) is exactly 0.0 in double precision once u exceeds ~38.6.
GAUSSIAN_UNDERFLOW_RADIUS = 40.0


@dataclass(frozen=True)
class KernelSpec:
    """
    A kernel K together with the constants that enter the bias and variance bounds.

    `support` is the radius r of a closed support [-r, r], or None when unbounded.
    The callables work on numpy arrays; `abs_moment_fn` and `self_convolution_fn`
    are optional closed forms, with quadrature used when they are missing.
    """
    name: str
    support: Optional[float]
    sup_norm: float
    l1_norm: float
    l2_norm_sq: float
    has_closed_self_convolution: bool
    pdf_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    abs_moment_fn: Optional[Callable[[float], float]] = field(default=None, repr=False, compare=False)
    self_convolution_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False, compare=False)

    @property
    def is_compact(self) -> bool:
        return self.support is not None


# --- Kernel Shapes ---

def _gaussian(u: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * u * u) * _INV_SQRT_2PI


def _box(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 0.5, 0.0)


def _triangular(u: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.abs(u))


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


# --- Self-Convolutions ---

def _gaussian_conv(t: np.ndarray) -> np.ndarray:
    # N(0, 2) density
    return np.exp(-0.25 * t * t) * _INV_2_SQRT_PI


def _box_conv(t: np.ndarray) -> np.ndarray:
    a = np.abs(t)
    return np.where(a <= 2.0, (2.0 - a) / 4.0, 0.0)


def _triangular_conv(t: np.ndarray) -> np.ndarray:
    # cubic B-spline: four-fold convolution of the unit box on [-1/2, 1/2]
    a = np.abs(t)
    inner = 2.0 / 3.0 - a * a + 0.5 * a ** 3
    outer = (2.0 - a) ** 3 / 6.0
    return np.where(a <= 1.0, inner, np.where(a <= 2.0, outer, 0.0))


def _epanechnikov_conv(t: np.ndarray) -> np.ndarray:
    a = np.abs(t)
    value = (3.0 / 160.0) * (2.0 - a) ** 3 * (a * a + 6.0 * a + 4.0)
    return np.where(a <= 2.0, value, 0.0)


# --- Absolute Moments: integral of |K(u)| |u|^beta du ---

def _gaussian_moment(beta: float) -> float:
    return 2.0 ** (beta / 2.0) * special.gamma((beta + 1.0) / 2.0) / math.sqrt(math.pi)


def _box_moment(beta: float) -> float:
    return 1.0 / (beta + 1.0)


def _triangular_moment(beta: float) -> float:
    return 2.0 / ((beta + 1.0) * (beta + 2.0))


def _epanechnikov_moment(beta: float) -> float:
    return 3.0 / ((beta + 1.0) * (beta + 3.0))


# --- Registry ---

KERNELS: Dict[str, KernelSpec] = {
    "gaussian": KernelSpec(
        name="gaussian", support=None, sup_norm=_INV_SQRT_2PI, l1_norm=1.0,
        l2_norm_sq=_INV_2_SQRT_PI, has_closed_self_convolution=True,
        pdf_fn=_gaussian, abs_moment_fn=_gaussian_moment, self_convolution_fn=_gaussian_conv),
    "box": KernelSpec(
        name="box", support=1.0, sup_norm=0.5, l1_norm=1.0, l2_norm_sq=0.5,
        has_closed_self_convolution=True,
        pdf_fn=_box, abs_moment_fn=_box_moment, self_convolution_fn=_box_conv),
    "triangular": KernelSpec(
        name="triangular", support=1.0, sup_norm=1.0, l1_norm=1.0, l2_norm_sq=2.0 / 3.0,
        has_closed_self_convolution=True,
        pdf_fn=_triangular, abs_moment_fn=_triangular_moment, self_convolution_fn=_triangular_conv),
    "epanechnikov": KernelSpec(
        name="epanechnikov", support=1.0, sup_norm=0.75, l1_norm=1.0, l2_norm_sq=0.6,
        has_closed_self_convolution=True,
        pdf_fn=_epanechnikov, abs_moment_fn=_epanechnikov_moment, self_convolution_fn=_epanechnikov_conv),
}


def kernel_names() -> List[str]:
    return list(KERNELS)


def get_kernel(kernel: Union[str, KernelSpec]) -> KernelSpec:
    """Resolves a kernel name (case-insensitive) or passes a KernelSpec through."""
    if isinstance(kernel, KernelSpec):
        return kernel
    key = str(kernel).strip().lower()
    if key not in KERNELS:
        raise InvalidParameterError(f"unknown kernel '{kernel}'; choose one of {', '.join(KERNELS)}")
    return KERNELS[key]


# --- Public Operations ---

def eval_kernel(k: KernelSpec, u: ArrayLike) -> ArrayLike:
    """K(u). Scalars in, scalars out; arrays are evaluated elementwise."""
    values = k.pdf_fn(np.asarray(u, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def _check_bandwidth(h: float) -> float:
    h = float(h)
    if not (h > 0.0 and math.isfinite(h)):
        raise InvalidBandwidthError(f"bandwidth must be positive and finite, got {h}")
    return h


def scaled_eval(k: KernelSpec, h: float, x: ArrayLike) -> ArrayLike:
    """K_h(x) = K(x / h) / h."""
    h = _check_bandwidth(h)
    values = k.pdf_fn(np.asarray(x, dtype=float) / h) / h
    return float(values) if np.ndim(values) == 0 else values


def effective_radius(k: KernelSpec) -> float:
    """
    Radius outside which K evaluates to exactly 0.0 in floating point.
    Pairs further apart than radius * h contribute nothing to a pairwise sum.
    """
    if k.support is not None:
        return float(k.support)
    if k.name == "gaussian":
        return GAUSSIAN_UNDERFLOW_RADIUS
    return math.inf


def _integrate_over_support(k: KernelSpec, func: Callable[[float], float]) -> float:
    """Integrates an even integrand over the kernel support as twice the half-line integral."""
    upper = float(k.support) if k.support is not None else math.inf
    # any QUADPACK complaint on a moment integral is read as divergence
    return 2.0 * quad_checked(func, 0.0, upper, error_cls=DivergenceError, fail_on=(1, 2, 3, 4, 5, 6, 7))


def abs_moment(k: KernelSpec, beta: float) -> float:
    """
    Returns the integral of |K(u)| |u|^beta du.

    Closed forms are used for the built-in kernels; any other kernel goes through
    adaptive quadrature, and a non-convergent integral raises DivergenceError.
    """
    beta = float(beta)
    if beta < 0 or not math.isfinite(beta):
        raise InvalidParameterError(f"moment order must be >= 0, got {beta}")
    if k.abs_moment_fn is not None:
        return float(k.abs_moment_fn(beta))
    logger.debug("[KERNEL] no closed-form moment for '%s', using quadrature", k.name)
    return _integrate_over_support(k, lambda u: abs(float(k.pdf_fn(np.asarray(u)))) * u ** beta)


def l2_norm_sq(k: KernelSpec) -> float:
    """The integral of K(u)^2 du."""
    return k.l2_norm_sq


def self_convolution(k: KernelSpec, t: ArrayLike) -> ArrayLike:
    """
    (K * K)(t). The cross term int K_h(x - a) K_h(x - b) dx equals
    self_convolution(k, (a - b) / h) / h.
    """
    t_arr = np.asarray(t, dtype=float)
    if k.self_convolution_fn is not None:
        values = k.self_convolution_fn(t_arr)
        return float(values) if np.ndim(values) == 0 else values
    values = np.vectorize(lambda s: _numeric_self_convolution(k, float(s)), otypes=[float])(t_arr)
    return float(values) if np.ndim(values) == 0 else values


def _numeric_self_convolution(k: KernelSpec, t: float) -> float:
    def integrand(u: float) -> float:
        return float(k.pdf_fn(np.asarray(u)) * k.pdf_fn(np.asarray(t - u)))

    if k.support is not None:
        r = float(k.support)
        lo, hi = max(-r, t - r), min(r, t + r)
        if lo >= hi:
            return 0.0
        return quad_checked(integrand, lo, hi, points=[p for p in (0.0, t) if lo < p < hi] or None)
    return quad_checked(integrand, -math.inf, math.inf)


def self_convolution_radius(k: KernelSpec) -> float:
    """Effective radius of K * K."""
    return 2.0 * effective_radius(k)
