# densities.py
# Test densities with analytic integrals of f^2 and f^3, known Sobolev order and exact samplers.
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple, Union

import numpy as np
from scipy import optimize, special

import config
from errors import InvalidParameterError, SampleTooSmallError
from estimators import Sample
from utils import derive_seed, format_specifier, parse_specifier, quad_checked

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Offset and clamp that map numpy's [0, 1) doubles onto the open interval (0, 1).
_HALF_ULP = 2.0 ** -54
_BELOW_ONE = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class TestDensity:
    """
    A univariate density f0 with everything the bias, variance and CLT statements need.

    `sobolev_sup` is the supremum of alpha with f0 in H_2^alpha (math.inf for the
    analytic families). `theta2` and `theta3` are the integrals of f0^2 and f0^3;
    either may be math.inf for the unbounded cusp family.
    """
    name: str
    params: Dict[str, float]
    sobolev_sup: float
    sup_norm: float
    theta2: float
    theta3: float
    sampler_kind: str
    support: Tuple[float, float]
    pdf_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    cdf_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    # maps an (m, uniforms_per_draw) array of (0, 1) uniforms to m draws
    sampler_fn: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    autocorrelation_fn: Callable[[float], float] = field(repr=False, compare=False)
    char_abs_sq_fn: Callable[[float], float] = field(repr=False, compare=False)
    uniforms_per_draw: int = 1
    # points where f0 is singular or not smooth; quadrature splits there
    breakpoints: Tuple[float, ...] = ()

    @property
    def spec(self) -> str:
        return format_specifier(self.name, self.params)


# --- Gaussian ---

def gaussian(mu: float = 0.0, sigma: float = 1.0) -> TestDensity:
    if sigma <= 0:
        raise InvalidParameterError(f"gaussian sigma must be > 0, got {sigma}")
    norm_const = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def pdf(x):
        z = (x - mu) / sigma
        return norm_const * np.exp(-0.5 * z * z)

    def autocorrelation(t):
        # N(0, 2 sigma^2) density
        var = 2.0 * sigma * sigma
        return math.exp(-t * t / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)

    return TestDensity(
        name="gaussian", params={"mu": mu, "sigma": sigma}, sobolev_sup=math.inf,
        sup_norm=norm_const, theta2=1.0 / (2.0 * sigma * math.sqrt(math.pi)),
        theta3=1.0 / (2.0 * math.pi * sigma * sigma * math.sqrt(3.0)),
        sampler_kind="inverse-CDF", support=(-math.inf, math.inf),
        pdf_fn=pdf, cdf_fn=lambda x: special.ndtr((x - mu) / sigma),
        sampler_fn=lambda u: mu + sigma * special.ndtri(u[:, 0]),
        autocorrelation_fn=autocorrelation,
        char_abs_sq_fn=lambda u: math.exp(-(sigma * u) ** 2),
    )


# --- Laplace ---

def laplace(b: float = 1.0, mu: float = 0.0) -> TestDensity:
    if b <= 0:
        raise InvalidParameterError(f"laplace scale b must be > 0, got {b}")

    def cdf(x):
        z = (np.asarray(x, dtype=float) - mu) / b
        return np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(z, 0.0)))

    def sampler(u):
        v = u[:, 0] - 0.5
        return mu - b * np.sign(v) * np.log1p(-2.0 * np.abs(v))

    def autocorrelation(t):
        a = abs(t) / b
        return math.exp(-a) * (1.0 + a) / (4.0 * b)

    return TestDensity(
        name="laplace", params={"b": b, "mu": mu}, sobolev_sup=1.5,
        sup_norm=1.0 / (2.0 * b), theta2=1.0 / (4.0 * b), theta3=1.0 / (12.0 * b * b),
        sampler_kind="inverse-CDF", support=(-math.inf, math.inf),
        pdf_fn=lambda x: np.exp(-np.abs(x - mu) / b) / (2.0 * b), cdf_fn=cdf,
        sampler_fn=sampler, autocorrelation_fn=autocorrelation,
        char_abs_sq_fn=lambda u: 1.0 / (1.0 + (b * u) ** 2) ** 2,
        breakpoints=(mu,),
    )


# --- Uniform ---

def uniform(a: float = 0.0, b: float = 1.0) -> TestDensity:
    if not b > a:
        raise InvalidParameterError(f"uniform needs a < b, got a={a}, b={b}")
    width = b - a

    def char_abs_sq(u):
        half = 0.5 * u * width
        return 1.0 if half == 0 else (math.sin(half) / half) ** 2

    return TestDensity(
        name="uniform", params={"a": a, "b": b}, sobolev_sup=0.5,
        sup_norm=1.0 / width, theta2=1.0 / width, theta3=1.0 / width ** 2,
        sampler_kind="inverse-CDF", support=(a, b),
        pdf_fn=lambda x: np.where((x >= a) & (x <= b), 1.0 / width, 0.0),
        cdf_fn=lambda x: np.clip((np.asarray(x, dtype=float) - a) / width, 0.0, 1.0),
        sampler_fn=lambda u: a + width * u[:, 0],
        autocorrelation_fn=lambda t: max(0.0, width - abs(t)) / width ** 2,
        char_abs_sq_fn=char_abs_sq,
        breakpoints=(a, b),
    )


# --- Two-Component Gaussian Mixture ---

def _normal_pdf(x: float, var: float) -> float:
    return math.exp(-x * x / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _gaussian_product_integral(comps) -> float:
    """Integral over the real line of a product of normal densities given as (mean, var)."""
    (m, v), rest = comps[0], comps[1:]
    scale = 1.0
    for m2, v2 in rest:
        scale *= _normal_pdf(m - m2, v + v2)
        m, v = (m * v2 + m2 * v) / (v + v2), v * v2 / (v + v2)
    return scale


def mixture(w: float = 0.5, mu1: float = -1.0, sigma1: float = 0.5,
            mu2: float = 1.0, sigma2: float = 0.5) -> TestDensity:
    if not 0.0 < w < 1.0:
        raise InvalidParameterError(f"mixture weight must be in (0, 1), got {w}")
    if sigma1 <= 0 or sigma2 <= 0:
        raise InvalidParameterError("mixture sigmas must be > 0")
    weights = (w, 1.0 - w)
    comps = ((mu1, sigma1 ** 2), (mu2, sigma2 ** 2))

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return sum(wk * np.exp(-(x - m) ** 2 / (2.0 * v)) / np.sqrt(2.0 * np.pi * v)
                   for wk, (m, v) in zip(weights, comps))

    def cdf(x):
        x = np.asarray(x, dtype=float)
        return sum(wk * special.ndtr((x - m) / math.sqrt(v)) for wk, (m, v) in zip(weights, comps))

    def sampler(u):
        first = u[:, 0] < w
        z = special.ndtri(u[:, 1])
        return np.where(first, mu1 + sigma1 * z, mu2 + sigma2 * z)

    def autocorrelation(t):
        return sum(weights[i] * weights[j] * _normal_pdf(t - (comps[j][0] - comps[i][0]), comps[i][1] + comps[j][1])
                   for i in range(2) for j in range(2))

    def char_abs_sq(u):
        (m1, v1), (m2, v2) = comps
        return (w ** 2 * math.exp(-v1 * u * u) + (1 - w) ** 2 * math.exp(-v2 * u * u)
                + 2.0 * w * (1 - w) * math.exp(-0.5 * (v1 + v2) * u * u) * math.cos(u * (m1 - m2)))

    theta2 = sum(weights[i] * weights[j] * _gaussian_product_integral([comps[i], comps[j]])
                 for i in range(2) for j in range(2))
    theta3 = sum(weights[i] * weights[j] * weights[k] * _gaussian_product_integral([comps[i], comps[j], comps[k]])
                 for i, j, k in itertools.product(range(2), repeat=3))

    # the maximum sits near one of the component means
    peaks = []
    for m, v in comps:
        s = math.sqrt(v)
        res = optimize.minimize_scalar(lambda x: -float(pdf(x)), bounds=(m - 3 * s, m + 3 * s), method="bounded",
                                       options={"xatol": 1e-12})
        peaks.append(-float(res.fun))

    return TestDensity(
        name="mixture", params={"w": w, "mu1": mu1, "sigma1": sigma1, "mu2": mu2, "sigma2": sigma2},
        sobolev_sup=math.inf, sup_norm=max(peaks), theta2=theta2, theta3=theta3,
        sampler_kind="direct", support=(-math.inf, math.inf),
        pdf_fn=pdf, cdf_fn=cdf, sampler_fn=sampler, uniforms_per_draw=2,
        autocorrelation_fn=autocorrelation, char_abs_sq_fn=char_abs_sq,
    )


# --- Cusp: c |x|^gamma on [-1, 1] ---

def cusp(gamma: float = -0.3) -> TestDensity:
    """
    Density c|x|^gamma on [-1, 1] with c = (gamma + 1) / 2 and -1/2 < gamma < 0.
    It is unbounded at 0, lies in H_2^alpha for every alpha < gamma + 1/2, and its
    integral of f^3 is finite only for gamma > -1/3.
    """
    if not -0.5 < gamma < 0.0:
        raise InvalidParameterError(f"cusp gamma must be in (-0.5, 0), got {gamma}")
    c = (gamma + 1.0) / 2.0
    p = gamma + 1.0

    def pdf(x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= 1.0
        with np.errstate(divide="ignore"):
            return np.where(inside, c * np.abs(x) ** gamma, 0.0)

    def cdf(x):
        x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
        return 0.5 + 0.5 * np.sign(x) * np.abs(x) ** p

    def sampler(u):
        v = 2.0 * u[:, 0] - 1.0
        return np.sign(v) * np.abs(v) ** (1.0 / p)

    beta_term = special.beta(gamma + 1.0, gamma + 1.0)

    def autocorrelation(t):
        s = abs(t)
        if s >= 2.0:
            return 0.0
        if s == 0.0:
            return 2.0 * c * c / (2.0 * gamma + 1.0)
        if s <= 1.0:
            # [-s, 0] in closed form; [-1, -s] mirrors [0, 1 - s]
            middle = s ** (2.0 * gamma + 1.0) * beta_term
            side = 0.0
            if s < 1.0:
                side = quad_checked(lambda x: (x + s) ** gamma, 0.0, 1.0 - s, weight="alg", wvar=(gamma, 0.0))
            return c * c * (middle + 2.0 * side)
        return c * c * quad_checked(lambda x: (-x) ** gamma * (x + s) ** gamma, -1.0, 1.0 - s)

    def char_abs_sq(u):
        if u == 0:
            return 1.0
        # x^gamma goes into the algebraic weight so the singular endpoint is never evaluated
        w = abs(u)
        ft = 2.0 * c * quad_checked(lambda x: math.cos(w * x), 0.0, 1.0, weight="alg", wvar=(gamma, 0.0))
        return ft * ft

    theta3 = 2.0 * c ** 3 / (3.0 * gamma + 1.0) if gamma > -1.0 / 3.0 else math.inf

    return TestDensity(
        name="cusp", params={"gamma": gamma}, sobolev_sup=gamma + 0.5, sup_norm=math.inf,
        theta2=2.0 * c * c / (2.0 * gamma + 1.0), theta3=theta3,
        sampler_kind="inverse-CDF", support=(-1.0, 1.0),
        pdf_fn=pdf, cdf_fn=cdf, sampler_fn=sampler,
        autocorrelation_fn=autocorrelation, char_abs_sq_fn=char_abs_sq,
        breakpoints=(-1.0, 0.0, 1.0),
    )


# --- Registry ---

DENSITY_FACTORIES: Dict[str, Callable[..., TestDensity]] = {
    "gaussian": gaussian,
    "laplace": laplace,
    "uniform": uniform,
    "mixture": mixture,
    "cusp": cusp,
}


def parse_density(spec: Union[str, TestDensity]) -> TestDensity:
    """Builds a density from a specifier such as "gaussian:mu=0,sigma=1" or "cusp:gamma=-0.3"."""
    if isinstance(spec, TestDensity):
        return spec
    name, params = parse_specifier(spec)
    if name not in DENSITY_FACTORIES:
        raise InvalidParameterError(f"unknown density '{name}'; choose one of {', '.join(DENSITY_FACTORIES)}")
    try:
        return DENSITY_FACTORIES[name](**params)
    except TypeError as e:
        raise InvalidParameterError(f"bad parameters for density '{name}': {e}") from None


# --- Public Operations ---

def pdf(d: TestDensity, x: ArrayLike) -> ArrayLike:
    values = d.pdf_fn(np.asarray(x, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def cdf(d: TestDensity, x: ArrayLike) -> ArrayLike:
    values = d.cdf_fn(np.asarray(x, dtype=float))
    return float(values) if np.ndim(values) == 0 else values


def open_unit(u: np.ndarray) -> np.ndarray:
    """Shifts [0, 1) doubles by half an ulp; the largest one would round up to 1.0 and is clamped."""
    return np.minimum(np.asarray(u, dtype=float) + _HALF_ULP, _BELOW_ONE)


def _chunk_uniforms(seed: int, chunk: int, count: int, per_draw: int) -> np.ndarray:
    """Uniforms on (0, 1) for draws [chunk * SAMPLE_CHUNK, chunk * SAMPLE_CHUNK + count)."""
    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, chunk)))
    return open_unit(rng.random((count, per_draw)))


def sample(d: TestDensity, n: int, seed: int) -> Sample:
    """
    Draws n i.i.d. observations. Draw i is a function of (seed, i) only: it comes
    from the counter-based stream keyed by (seed, i // SAMPLE_CHUNK), so samples
    are reproducible bit for bit and the first m draws never depend on n.
    """
    n = int(n)
    if n < 2:
        raise SampleTooSmallError(f"need n >= 2 observations, got {n}")
    chunks = []
    for chunk, start in enumerate(range(0, n, config.SAMPLE_CHUNK)):
        count = min(config.SAMPLE_CHUNK, n - start)
        chunks.append(d.sampler_fn(_chunk_uniforms(seed, chunk, count, d.uniforms_per_draw)))
    return Sample.from_values(np.concatenate(chunks))


def theta2(d: TestDensity) -> float:
    return d.theta2


def theta3(d: TestDensity) -> float:
    return d.theta3


def tau_sq(d: TestDensity) -> float:
    """Variance constant of the CLT: integral of f^3 minus (integral of f^2)^2."""
    if math.isinf(d.theta3):
        return math.inf
    return max(0.0, d.theta3 - d.theta2 ** 2)


def autocorrelation(d: TestDensity, t: float) -> float:
    """(f0_bar * f0)(t) = integral of f0(x) f0(x + t) dx; equals theta2 at t = 0."""
    return float(d.autocorrelation_fn(float(t)))


def characteristic_abs_sq(d: TestDensity, u: float) -> float:
    """|F f0(u)|^2, used by the Fourier-decay Sobolev check."""
    return float(d.char_abs_sq_fn(float(u)))
