"""
Special functions - Modified Bessel functions of the first kind with real order,
the bivariate Gaussian kernel, and truncation control for the wedge series.

I_v is evaluated from its power series

    I_v(z) = sum_k (z/2)^(2k+v) / (k! Gamma(v+k+1))

with every term built in log space (log-gamma, no overflow in term construction)
and summed with a log-sum-exp, so the exponentially scaled form e^-z I_v(z) is
obtained without ever forming I_v(z) itself.
"""

import logging
import math
from dataclasses import dataclass
from typing import NewType, Tuple, Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

BesselOrder = NewType("BesselOrder", float)

# log of the largest finite double
_LOG_MAX = math.log(np.finfo(float).max)
# a term this far (in log) below the running sum no longer changes it
_LOG_NEGLIGIBLE = math.log(np.finfo(float).eps) - 4.0
_MAX_SERIES_LENGTH = 1 << 16


@dataclass(frozen=True)
class SeriesBudget:
    """Truncation budget for the n-sum of the wedge series."""
    rel_tol: float = 1e-12
    max_terms: int = 400

    def __post_init__(self) -> None:
        if not 0.0 < self.rel_tol < 1.0:
            raise DomainError(f"SeriesBudget.rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 1:
            raise DomainError(f"SeriesBudget.max_terms must be >= 1, got {self.max_terms}")


@dataclass(frozen=True)
class SeriesTruncation:
    """Advisory truncation length and whether the tail bound was met."""
    n_terms: int
    bound_met: bool


def bessel_order(v: float) -> BesselOrder:
    """Validate and tag a Bessel order."""
    if not math.isfinite(v) or v < 0.0:
        raise DomainError(f"Bessel order must be finite and >= 0, got {v}")
    return BesselOrder(float(v))


def _check_arguments(v: np.ndarray, z: np.ndarray) -> None:
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(z))):
        raise DomainError("bessel_i: order and argument must be finite")
    if np.any(v < 0.0):
        raise DomainError(f"bessel_i: order must be >= 0, got min {float(v.min())}")
    if np.any(z < 0.0):
        raise DomainError(f"bessel_i: argument must be >= 0, got min {float(z.min())}")


def _peak_index(v: np.ndarray, z: np.ndarray) -> np.ndarray:
    # consecutive terms have ratio (z/2)^2 / ((k+1)(k+v+1)), which crosses 1 near here
    return np.maximum(0.0, 0.5 * (np.hypot(v, z) - v) - 1.0)


def _log_bessel_i(v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """log I_v(z) for broadcast arrays v, z (both validated)."""
    v, z = np.broadcast_arrays(v, z)
    out = np.empty(v.shape, dtype=float)
    if out.size == 0:
        return out

    zero = z == 0.0
    out[zero] = np.where(v[zero] == 0.0, 0.0, -np.inf)
    live = ~zero
    if not np.any(live):
        return out

    vl = v[live][:, None]
    zl = z[live]
    log_half = np.log(0.5 * zl)[:, None]
    k_peak = np.floor(_peak_index(vl, zl[:, None]))

    # terms are log-concave in k; only a window around the peak contributes
    half_width = int(math.ceil(10.0 * math.sqrt(float(k_peak.max()) + 1.0) + 25.0))
    while True:
        k_lo = np.maximum(0.0, k_peak - half_width)
        k = k_lo + np.arange(2 * half_width + 1, dtype=float)
        log_terms = (2.0 * k + vl) * log_half - gammaln(k + 1.0) - gammaln(vl + k + 1.0)
        log_sum = logsumexp(log_terms, axis=-1)
        right_ok = log_terms[:, -1] - log_sum < _LOG_NEGLIGIBLE
        left_ok = (k_lo[:, 0] == 0.0) | (log_terms[:, 0] - log_sum < _LOG_NEGLIGIBLE)
        if np.all(right_ok & left_ok) or 2 * half_width >= _MAX_SERIES_LENGTH:
            break
        half_width *= 2
        logger.debug("bessel series window widened to %d terms", 2 * half_width + 1)

    out[live] = log_sum
    return out


def _to_output(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def bessel_i(v: ArrayLike, z: ArrayLike) -> ArrayLike:
    """
    Modified Bessel function of the first kind, I_v(z).

    Args:
        v: Order(s), >= 0.
        z: Argument(s), >= 0.

    Returns:
        I_v(z); a float for scalar inputs, otherwise an array of the broadcast shape.

    Raises:
        DomainError: negative or non-finite order or argument.
        OverflowError: the result exceeds the double range (use bessel_i_scaled).
    """
    va = np.asarray(v, dtype=float)
    za = np.asarray(z, dtype=float)
    _check_arguments(va, za)
    log_i = _log_bessel_i(va, za)
    if np.any(log_i > _LOG_MAX):
        raise OverflowError(
            f"bessel_i overflows for argument up to {float(za.max()):.6g}; use bessel_i_scaled"
        )
    return _to_output(np.exp(log_i), va.ndim == 0 and za.ndim == 0)


def bessel_i_scaled(v: ArrayLike, z: ArrayLike) -> ArrayLike:
    """
    Exponentially scaled modified Bessel function, e^-z I_v(z).

    Never overflows: the scaling is applied inside the log-space sum.

    Args:
        v: Order(s), >= 0.
        z: Argument(s), >= 0.

    Returns:
        e^-z I_v(z) with the broadcast shape of the inputs.
    """
    va = np.asarray(v, dtype=float)
    za = np.asarray(z, dtype=float)
    _check_arguments(va, za)
    log_i = _log_bessel_i(va, za)
    return _to_output(np.exp(log_i - np.broadcast_to(za, log_i.shape)), va.ndim == 0 and za.ndim == 0)


def gauss2(x: np.ndarray) -> ArrayLike:
    """
    Standard bivariate Gaussian kernel (2 pi)^-1 exp(-x.x / 2).

    Args:
        x: Array whose last axis has length 2.
    """
    xa = np.asarray(x, dtype=float)
    if xa.shape[-1] != 2:
        raise DomainError(f"gauss2 expects 2-vectors, got shape {xa.shape}")
    values = np.exp(-0.5 * np.sum(xa * xa, axis=-1)) / (2.0 * math.pi)
    return _to_output(values, xa.ndim == 1)


def _geometric_ratio(alpha: float, z: float, half_orders: bool = False) -> float:
    exponent = math.pi / (2.0 * alpha) if half_orders else math.pi / alpha
    return (0.5 * z) ** exponent


def truncation_length(alpha: float, z: float, budget: SeriesBudget) -> SeriesTruncation:
    """
    Advisory number of terms for the n-sum of I_{n pi/alpha}(z).

    Uses the term bound I_v(z) < e (z/2)^v, so the tail beyond N is bounded by
    sum_{n>N} n e q^n with q = (z/2)^(pi/alpha), a closed-form geometric tail.
    The bound only decays for z < 2; otherwise max_terms is returned with
    bound_met False and the caller re-checks the achieved decay.

    Args:
        alpha: Wedge angle in (0, pi).
        z: Bessel argument, >= 0.
        budget: Relative tolerance and term cap.

    Returns:
        SeriesTruncation(n_terms, bound_met).
    """
    if not 0.0 < alpha < math.pi:
        raise DomainError(f"truncation_length: alpha must lie in (0, pi), got {alpha}")
    if z < 0.0 or not math.isfinite(z):
        raise DomainError(f"truncation_length: z must be finite and >= 0, got {z}")
    if z == 0.0:
        return SeriesTruncation(1, True)

    q = _geometric_ratio(alpha, z)
    if q >= 1.0:
        return SeriesTruncation(budget.max_terms, False)

    partial = 0.0
    for n in range(1, budget.max_terms + 1):
        partial += n * math.e * q**n
        tail = math.e * q ** (n + 1) * ((n + 1) - n * q) / (1.0 - q) ** 2
        if tail < budget.rel_tol * partial:
            return SeriesTruncation(n, True)
    return SeriesTruncation(budget.max_terms, False)


def geometric_tail(alpha: float, z: float, n_terms: int) -> Tuple[float, float]:
    """
    Partial sum and tail of the geometric bound used by truncation_length.

    Returns:
        (sum_{n<=N} n e q^n, sum_{n>N} n e q^n) for q = (z/2)^(pi/alpha) < 1.
    """
    q = _geometric_ratio(alpha, z)
    if q >= 1.0:
        raise DomainError(f"geometric bound diverges for z={z} >= 2")
    partial = sum(n * math.e * q**n for n in range(1, n_terms + 1))
    tail = math.e * q ** (n_terms + 1) * ((n_terms + 1) - n_terms * q) / (1.0 - q) ** 2
    return partial, tail


def series_tail_bound(alpha: float, z: float) -> float:
    """
    Explicit bound on sum_n n I_{n pi/(2 alpha)}(z) for z in (0, 1).

    e (1/2)^b z^b / (1 - (1/2)^b)^2 with b = pi / (2 alpha).
    """
    if not 0.0 < alpha < math.pi:
        raise DomainError(f"series_tail_bound: alpha must lie in (0, pi), got {alpha}")
    b = math.pi / (2.0 * alpha)
    half_b = 0.5**b
    return math.e * half_b * z**b / (1.0 - half_b) ** 2
