# utils.py
# Miscellaneous helpers: logging setup, specifier parsing, seeds and slope fits.
import hashlib
import logging
import sys
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

import config
from errors import InvalidParameterError, QuadratureError

logger = logging.getLogger(__name__)

# QUADPACK ier codes treated as failures: 1 subdivision limit, 3 bad integrand, 5 divergent.
_QUAD_FAILURES = (1, 3, 5)
# quad only reports the ier code through its message text.
_QUAD_MESSAGES = (
    ("maximum number of subdivisions", 1),
    ("roundoff error is detected, which prevents", 2),
    ("Extremely bad integrand", 3),
    ("does not converge", 4),
    ("probably divergent", 5),
    ("input is invalid", 6),
)


def normalize_text(text: str) -> str:
    """Collapses internal whitespace and strips the ends."""
    return " ".join(text.strip().split())


def setup_logging(level: str = "WARNING") -> None:
    """Routes all log records to standard error with a single handler."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s [%(levelname)s] %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.WARNING))


def parse_specifier(spec: str) -> Tuple[str, Dict[str, float]]:
    """
    Parses a "name:key=value,key=value" specifier such as "gaussian:mu=0,sigma=1".
    The parameter part is optional ("uniform" alone is valid).
    """
    text = normalize_text(spec).replace(" ", "")
    if not text:
        raise InvalidParameterError("empty specifier")
    name, _, rest = text.partition(":")
    params: Dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise InvalidParameterError(f"malformed parameter '{item}' in specifier '{spec}'")
            try:
                params[key.lower()] = float(value)
            except ValueError:
                raise InvalidParameterError(f"parameter '{key}' is not a number: '{value}'") from None
    return name.lower(), params


def format_specifier(name: str, params: Dict[str, float]) -> str:
    """Inverse of parse_specifier, with keys in insertion order."""
    if not params:
        return name
    body = ",".join(f"{key}={value:g}" for key, value in params.items())
    return f"{name}:{body}"


def derive_seed(*parts: int) -> int:
    """Stable 64-bit hash of a tuple of integers (independent of PYTHONHASHSEED)."""
    payload = ",".join(str(int(p)) for p in parts).encode("ascii")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def fit_log_slope(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares slope of log(y) against log(x) and its standard error.
    All inputs must be positive; at least two points are required.
    """
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.size < 2:
        raise InvalidParameterError("need at least two matching points for a slope fit")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise InvalidParameterError("slope fit needs strictly positive values")
    lx, ly = np.log(xs), np.log(ys)
    if xs.size == 2:
        return float((ly[1] - ly[0]) / (lx[1] - lx[0])), 0.0
    fit = stats.linregress(lx, ly)
    return float(fit.slope), float(fit.stderr)


def quad_checked(func, a: float, b: float, error_cls=QuadratureError,
                 fail_on: Sequence[int] = _QUAD_FAILURES, **kwargs) -> float:
    """
    Wraps scipy.integrate.quad with the project tolerances and turns QUADPACK
    failure codes into exceptions instead of warnings.
    """
    kwargs.setdefault("epsrel", config.QUAD_EPSREL)
    kwargs.setdefault("epsabs", config.QUAD_EPSABS)
    kwargs.setdefault("limit", config.QUAD_LIMIT)
    result = integrate.quad(func, a, b, full_output=1, **kwargs)
    value = result[0]
    # quad strips ier from its return tuple; on failure only the message comes back
    if len(result) > 3:
        message = str(result[3])
        ier = next((code for key, code in _QUAD_MESSAGES if key in message), 7)
        if ier in fail_on or not np.isfinite(value):
            raise error_cls(f"quadrature over [{a}, {b}] failed: {message}")
        logger.debug("[QUAD] accepted result over [%s, %s] despite: %s", a, b, message)
    elif not np.isfinite(value):
        raise error_cls(f"quadrature over [{a}, {b}] returned a non-finite value")
    return float(value)
