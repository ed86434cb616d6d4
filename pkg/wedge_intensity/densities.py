"""
Densities - Analytic first-passage densities of the two-firm model.

Closed forms for a single name (hitting time, survival, running-minimum terminal
density), the Bessel-series densities of the wedge (exit through the theta = alpha
edge, surviving position), the quadratures built on them (joint default density,
its tail, conditional asset kernels, survival probability), and the method-of-images
closed forms for wedges of angle pi / k.

Every product exp(-(r^2 + r0^2) / 2t) I_v(r r0 / t) is evaluated as
exp(-(r - r0)^2 / 2t) [e^-z I_v(z)] with z = r r0 / t.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DomainError
from .geometry import ReflectionSet, WedgeState, reflection_set
from .quadrature import DEFAULT_QUAD, QuadConfig, integrate_1d, integrate_wedge
from .special_fn import SeriesBudget, bessel_i_scaled, gauss2, truncation_length

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# pre-clamp values below this are reported, not silently zeroed
NEGATIVE_NOISE = 1e-12
_FIRST_BLOCK = 16
_MAX_BLOCK = 128
_LOG_2PI = math.log(2.0 * math.pi)
# density values and time masses below abs_tol * NEGLIGIBLE are treated as zero
NEGLIGIBLE = 1e-3


@dataclass(frozen=True)
class EvalQuality:
    """Numerical diagnostics attached to an evaluation."""
    series_terms_used: int = 1
    truncation_flag: bool = False
    quadrature_estimate_error: float = 0.0
    clamped: bool = False

    def __post_init__(self) -> None:
        if self.series_terms_used < 1:
            raise DomainError(f"series_terms_used must be >= 1, got {self.series_terms_used}")

    def merge(self, other: "EvalQuality") -> "EvalQuality":
        return EvalQuality(
            series_terms_used=max(self.series_terms_used, other.series_terms_used),
            truncation_flag=self.truncation_flag or other.truncation_flag,
            quadrature_estimate_error=self.quadrature_estimate_error + other.quadrature_estimate_error,
            clamped=self.clamped or other.clamped,
        )

    def with_error(self, error: float) -> "EvalQuality":
        return replace(self, quadrature_estimate_error=self.quadrature_estimate_error + abs(error))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "series_terms_used": self.series_terms_used,
            "truncation_flag": self.truncation_flag,
            "quadrature_estimate_error": self.quadrature_estimate_error,
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class DensityValue:
    """A nonnegative value (scalar or array) with its evaluation quality."""
    value: ArrayLike
    quality: EvalQuality = field(default_factory=EvalQuality)

    def __float__(self) -> float:
        return float(self.value)


class _Tracker:
    """Collects series diagnostics from integrand calls."""

    def __init__(self) -> None:
        self.quality = EvalQuality()

    def add(self, quality: EvalQuality) -> None:
        self.quality = self.quality.merge(replace(quality, quadrature_estimate_error=0.0))

    def result(self, value: ArrayLike, error: float, clamped: bool) -> "DensityValue":
        """Value with the collected diagnostics; a clamp at any level is kept."""
        quality = self.quality.with_error(error)
        return DensityValue(value, replace(quality, clamped=clamped or quality.clamped))


def _scalar(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def _positive(value: ArrayLike, name: str, label: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not (np.all(np.isfinite(arr)) and np.all(arr > 0.0)):
        raise DomainError(f"{label}: {name} must be positive and finite, got {value}")
    return arr


def _clamp(values: ArrayLike, label: str, upper: Optional[float] = None) -> Tuple[ArrayLike, bool]:
    arr = np.asarray(values, dtype=float)
    low = float(arr.min()) if arr.size else 0.0
    clamped = low < -NEGATIVE_NOISE
    if clamped:
        logger.warning("%s: clamped negative value %.3g to 0", label, low)
    out = np.maximum(arr, 0.0)
    if upper is not None:
        out = np.minimum(out, upper)
    return _scalar(out), clamped


# ---------------------------------------------------------------------------
# single-name closed forms
# ---------------------------------------------------------------------------

def pi_hit(x: ArrayLike, h: ArrayLike, m2: float) -> ArrayLike:
    """
    Density of the first time a unit-diffusion Brownian motion with drift m2,
    started at x, hits 0:  x / sqrt(2 pi h^3) exp(-(x + m2 h)^2 / 2h).

    Raises:
        DomainError: x <= 0 or h <= 0.
    """
    xa = _positive(x, "x", "pi_hit")
    ha = _positive(h, "h", "pi_hit")
    log_value = np.log(xa) - 0.5 * _LOG_2PI - 1.5 * np.log(ha) - (xa + m2 * ha) ** 2 / (2.0 * ha)
    return _scalar(np.exp(log_value))


def pi_survival(x: ArrayLike, u: ArrayLike, m2: float) -> ArrayLike:
    """
    Probability that the drift-m2 unit Brownian motion from x stays above 0 up to u:
    Phi((x + m2 u) / sqrt(u)) - e^(-2 m2 x) Phi((-x + m2 u) / sqrt(u)).
    """
    xa = _positive(x, "x", "pi_survival")
    ua = _positive(u, "u", "pi_survival")
    root = np.sqrt(ua)
    stay = ndtr((xa + m2 * ua) / root)
    reflected = np.exp(-2.0 * m2 * xa + log_ndtr((-xa + m2 * ua) / root))
    return _scalar(np.clip(stay - reflected, 0.0, 1.0))


def pi_tilde(x: ArrayLike, x0: ArrayLike, h: float, m2: float) -> ArrayLike:
    """
    Density of the level at time h of the drift-m2 unit Brownian motion from x0
    on the event that its running minimum stayed positive. Zero for x <= 0.
    """
    _positive(x0, "x0", "pi_tilde")
    _positive(h, "h", "pi_tilde")
    xa = np.asarray(x, dtype=float)
    inside = np.maximum(xa, 0.0)
    gauss = np.exp(-((inside - x0 - m2 * h) ** 2) / (2.0 * h)) / math.sqrt(2.0 * math.pi * h)
    values = np.where(xa > 0.0, gauss * -np.expm1(-2.0 * x0 * inside / h), 0.0)
    return _scalar(values)


def hit_probability(x: float, m2: float) -> float:
    """Total hitting mass of pi_hit over h in (0, inf): min(1, e^(-2 m2 x))."""
    _positive(x, "x", "hit_probability")
    return min(1.0, math.exp(-2.0 * m2 * x))


def pi_hit_argmax_level(h: float, m2: float) -> float:
    """Level x maximising pi_hit(x, h, m2) at fixed h."""
    _positive(h, "h", "pi_hit_argmax_level")
    return 0.5 * (math.sqrt(m2 * m2 * h * h + 4.0 * h) - m2 * h)


def pi_hit_argmax_time(x: float, m2: float) -> float:
    """Time h maximising pi_hit(x, h, m2) at fixed x."""
    _positive(x, "x", "pi_hit_argmax_time")
    if m2 == 0.0:
        return x * x / 3.0
    return math.sqrt(x * x / m2**2 + 9.0 / (4.0 * m2**4)) - 3.0 / (2.0 * m2**2)


# ---------------------------------------------------------------------------
# Bessel series of the wedge
# ---------------------------------------------------------------------------

def _wedge_series(
    alpha: float,
    z: np.ndarray,
    coefficients: Callable[[np.ndarray], np.ndarray],
    scale: np.ndarray,
    budget: SeriesBudget,
    floor: float = 0.0,
) -> Tuple[np.ndarray, int, bool]:
    """
    sum_n c_n e^-z I_{n pi/alpha}(z) at every node, summed in blocks of n.

    Both wedge series are bounded by 1 + z in absolute value, so nodes with
    |scale| (1 + z) <= floor are left at zero without summing. On the remaining
    nodes the sum stops when the last block's largest scaled term, times the decay
    allowance max(1, z / v), is below rel_tol of the largest scaled partial sum or
    below floor.

    Returns:
        (sums per node, terms used, truncation flag).
    """
    step = math.pi / alpha
    total = np.zeros(z.shape, dtype=float)
    active = np.abs(scale) * (1.0 + z) > floor
    if not np.any(active):
        return total, 1, False

    z_on = z[active]
    scale_on = np.abs(scale[active])
    part = np.zeros(z_on.shape, dtype=float)
    hint = truncation_length(alpha, float(z_on.max()), budget)
    block = min(budget.max_terms, hint.n_terms if hint.bound_met else _FIRST_BLOCK)
    n_lo = 1
    while True:
        n = np.arange(n_lo, min(n_lo + block, budget.max_terms + 1), dtype=float)
        orders = step * n
        scaled = np.asarray(bessel_i_scaled(orders[None, :], z_on[:, None]))
        coef = np.broadcast_to(coefficients(n), (z.size, n.size))[active]
        part = part + np.sum(coef * scaled, axis=1)
        used = int(n[-1])

        reach = np.max(np.abs(coef), axis=1) * scaled[:, -1] * np.maximum(1.0, z_on / orders[-1])
        target = max(budget.rel_tol * float(np.max(scale_on * np.abs(part))), floor)
        if np.max(scale_on * reach) <= target:
            break
        if used >= budget.max_terms:
            logger.warning("wedge series truncated at %d terms (z up to %.3g)", used, float(z_on.max()))
            total[active] = part
            return total, used, True
        n_lo = used + 1
        block = min(2 * block, _MAX_BLOCK)
    total[active] = part
    return total, used, False


def _exit_values(
    r: np.ndarray, t: float, s: WedgeState, q: QuadConfig, tilted: bool
) -> Tuple[np.ndarray, EvalQuality]:
    """Exit density through the theta = alpha edge at radii r, driftless or tilted."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    log_tilt = np.zeros_like(r)
    if tilted:
        exit_points = np.stack([r * math.cos(s.alpha), r * math.sin(s.alpha)], axis=-1)
        log_tilt = s.log_tilt(exit_points, t)

    k = s.reflection_k
    if q.prefer_closed_forms and k is not None:
        return np.asarray(b_reflect(r, t, s, k)) * np.exp(log_tilt), EvalQuality()

    scale = math.pi / (s.alpha**2 * t * r) * np.exp(log_tilt - (r - s.r) ** 2 / (2.0 * t))
    phase = math.pi * (s.alpha - s.theta) / s.alpha
    total, used, flag = _wedge_series(
        s.alpha, r * s.r / t, lambda n: n * np.sin(n * phase), scale, q.series_budget, q.abs_tol * NEGLIGIBLE
    )
    logger.debug("exit series: %d terms at t=%.6g", used, t)
    return scale * total, EvalQuality(series_terms_used=used, truncation_flag=flag)


def _surviving_values(
    r: np.ndarray, theta: ArrayLike, t: float, s: WedgeState, q: QuadConfig
) -> Tuple[np.ndarray, EvalQuality]:
    """Tilted surviving-position density in (r, theta) at radii r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    th = np.broadcast_to(np.asarray(theta, dtype=float), r.shape)

    k = s.reflection_k
    if q.prefer_closed_forms and k is not None:
        return np.asarray(h_reflect(r, th, t, s, k)), EvalQuality()

    points = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)
    log_scale = -((r - s.r) ** 2) / (2.0 * t) + s.log_tilt(points, t)
    scale = 2.0 * r / (t * s.alpha) * np.exp(log_scale)
    step = math.pi / s.alpha

    def coefficients(n: np.ndarray) -> np.ndarray:
        return np.sin(step * th[:, None] * n[None, :]) * np.sin(step * s.theta * n[None, :])

    total, used, flag = _wedge_series(
        s.alpha, r * s.r / t, coefficients, scale, q.series_budget, q.abs_tol * NEGLIGIBLE
    )
    return scale * total, EvalQuality(series_terms_used=used, truncation_flag=flag)


def b_series(r: ArrayLike, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Driftless density of exiting the wedge through the theta = alpha edge at radius r
    and time t (the event tau1 <= tau2), from the Bessel series.

    Args:
        r: Radius (or radii) on the exit edge.
        t: Exit time.
        s: Wedge state of the starting point.
        q: Series budget via q.series_rel_tol and q.series_max_terms.
    """
    _positive(r, "r", "b_series")
    _positive(t, "t", "b_series")
    values, quality = _exit_values(np.asarray(r, dtype=float), t, s, replace(q, prefer_closed_forms=False), False)
    value, clamped = _clamp(values if np.ndim(r) else values[0], "b_series")
    return DensityValue(value, replace(quality, clamped=clamped))


def f_exit(r: ArrayLike, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Exit density through the theta = alpha edge with the drift tilt
    exp(m.((r cos alpha, r sin alpha) - z0) - |m|^2 t / 2) applied.
    """
    _positive(r, "r", "f_exit")
    _positive(t, "t", "f_exit")
    values, quality = _exit_values(np.asarray(r, dtype=float), t, s, q, True)
    value, clamped = _clamp(values if np.ndim(r) else values[0], "f_exit")
    return DensityValue(value, replace(quality, clamped=clamped))


def h_survive(r: ArrayLike, theta: ArrayLike, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Sub-density of the surviving position, P(Z(t) in (dr, dtheta), tau > t), from the
    Bessel series at every angle. Zero on the absorbing edges theta = 0 and theta = alpha.
    """
    _positive(r, "r", "h_survive")
    _positive(t, "t", "h_survive")
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > s.alpha):
        raise DomainError(f"h_survive: theta must lie in [0, alpha={s.alpha}], got {theta}")
    values, quality = _surviving_values(np.asarray(r, dtype=float), th, t, s, replace(q, prefer_closed_forms=False))
    value, clamped = _clamp(values if np.ndim(r) else values[0], "h_survive")
    return DensityValue(value, replace(quality, clamped=clamped))


# ---------------------------------------------------------------------------
# quadratures
# ---------------------------------------------------------------------------

def radial_limit(s: WedgeState, t: float, q: QuadConfig) -> float:
    """r_hi = r0 + |m| t + tail_sigma sqrt(t); the Gaussian factor is negligible beyond it."""
    return s.r + math.sqrt(s.m_norm2) * t + q.tail_sigma * math.sqrt(t)


def _exit_points(s: WedgeState, t: float, r_hi: float) -> List[float]:
    # the exit density peaks near the projection of z0 onto the exit edge
    center = max(s.r * math.cos(s.alpha - s.theta), 0.0)
    root = math.sqrt(t)
    return [p for p in (center + k * root for k in (-4.0, -1.0, 0.0, 1.0, 4.0)) if 0.0 < p < r_hi]


def _union_exit_bound(t: float, s: WedgeState) -> float:
    """Upper bound on P(tau <= t) as the sum of the two one-edge hitting probabilities."""
    d1, d2 = s.edge_distances
    n1, n2 = s.edge_normal
    bound = 0.0
    for distance, drift in ((d1, s.m[0] * n1 + s.m[1] * n2), (d2, s.m[1])):
        if distance <= 0.0:
            return 1.0
        bound += 1.0 - float(pi_survival(distance, t, drift))
    return bound


def _edge_hit_mass(distance: float, t: float, drift: float) -> float:
    """P(a unit Brownian motion from distance with drift away from a line hits it by t)."""
    root = math.sqrt(t)
    near = float(ndtr(-(distance + drift * t) / root))
    far = math.exp(-2.0 * drift * distance + float(log_ndtr((drift * t - distance) / root)))
    return near + far


def exit_onset(s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> float:
    """
    Time before which exit through the theta = alpha edge carries less than
    abs_tol * NEGLIGIBLE of mass; time integrals over the exit time start here.

    Reaching the edge requires hitting its line, so the line's hitting probability
    bounds the exit mass. The search starts at d^2 / tail_sigma^2 and halves.
    """
    distance = s.edge_distances[0]
    if distance <= 0.0:
        return 0.0
    n1, n2 = s.edge_normal
    drift = s.m[0] * n1 + s.m[1] * n2
    threshold = q.abs_tol * NEGLIGIBLE
    onset = distance * distance / (q.tail_sigma * q.tail_sigma)
    for _ in range(200):
        if _edge_hit_mass(distance, onset, drift) <= threshold:
            return onset
        onset *= 0.5
    return 0.0


def survival_prob(t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    P(tau > t) with tau = min(tau1, tau2), the wedge integral of h_survive.

    When both single-edge hitting probabilities together are below abs_tol the
    integral is skipped and 1 minus half that bound is returned.
    """
    _positive(t, "t", "survival_prob")
    union = _union_exit_bound(t, s)
    if union < q.abs_tol:
        return DensityValue(1.0 - 0.5 * union, EvalQuality(quadrature_estimate_error=0.5 * union))

    tracker = _Tracker()

    def integrand(r: np.ndarray, theta: float) -> np.ndarray:
        values, quality = _surviving_values(r, theta, t, s, q)
        tracker.add(quality)
        return values

    r_hi = radial_limit(s, t, q)
    root = math.sqrt(t)
    offsets = (-4.0, -1.0, 1.0, 4.0)
    r_points = [s.r + k * root for k in offsets]
    theta_points = [s.theta + k * root / s.r for k in offsets]
    result = integrate_wedge(integrand, s.alpha, r_hi, q, r_points, theta_points, label="survival_prob")
    value, clamped = _clamp(result.value, "survival_prob", upper=1.0)
    logger.debug("survival_prob(t=%.6g) = %.12g +- %.2g", t, value, result.error)
    return tracker.result(value, result.error, clamped)


def exit_time_density(t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """Density of tau1 at t on {tau1 <= tau2}: the integral of f_exit over the exit edge."""
    _positive(t, "t", "exit_time_density")
    tracker = _Tracker()

    def integrand(r: np.ndarray) -> np.ndarray:
        values, quality = _exit_values(r, t, s, q, True)
        tracker.add(quality)
        return values

    r_hi = radial_limit(s, t, q)
    result = integrate_1d(integrand, 0.0, r_hi, q, points=_exit_points(s, t, r_hi), label="exit_time_density")
    value, clamped = _clamp(result.value, "exit_time_density")
    return tracker.result(value, result.error, clamped)


def exit_probability(t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    P(tau1 <= min(t, tau2)): exit mass through the theta = alpha edge by time t,
    integrated over (exit_onset, t).
    """
    _positive(t, "t", "exit_probability")
    tracker = _Tracker()

    def integrand(times: np.ndarray) -> np.ndarray:
        out = np.empty(times.shape)
        for i, u in enumerate(times):
            density = exit_time_density(float(u), s, q)
            tracker.add(density.quality)
            out[i] = density.value
        return out

    onset = exit_onset(s, q)
    if t <= onset:
        return DensityValue(0.0)
    result = integrate_1d(integrand, onset, t, q.outer(), label="exit_probability")
    value, clamped = _clamp(result.value, "exit_probability", upper=1.0)
    return tracker.result(value, result.error, clamped)


def _conditioned_radial(
    s_tau: float,
    h: float,
    s: WedgeState,
    q: QuadConfig,
    kernel: Callable[[np.ndarray], np.ndarray],
    extra_points: Sequence[float],
    label: str,
) -> DensityValue:
    """Integral over the exit radius of f_exit(r, s_tau) times a kernel of r sin(alpha)."""
    tracker = _Tracker()

    def integrand(r: np.ndarray) -> np.ndarray:
        values, quality = _exit_values(r, s_tau, s, q, True)
        tracker.add(quality)
        return values * kernel(r)

    sin_a = math.sin(s.alpha)
    root = math.sqrt(h)
    near = [k * root / sin_a for k in (1.0, 4.0, 16.0)]
    r_hi = radial_limit(s, s_tau, q)
    points = [p for p in [*near, *_exit_points(s, s_tau, r_hi), *extra_points] if 0.0 < p < r_hi]
    result = integrate_1d(integrand, 0.0, r_hi, q, points=points, label=label)
    value, clamped = _clamp(result.value, label)
    return tracker.result(value, result.error, clamped)


def _check_times(s_tau: float, t: float, label: str) -> None:
    if not (0.0 < s_tau < t and math.isfinite(t)):
        raise DomainError(f"{label}: need 0 < s < t, got s={s_tau}, t={t}")


def g_joint(s_tau: float, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Joint density of (tau1, tau2) at (s_tau, t) on {tau1 < tau2}:
    the integral over r of f_exit(r, s_tau) pi_hit(r sin alpha, t - s_tau, m2).

    Raises:
        DomainError: s_tau >= t.
        QuadratureError: the radial integral did not converge.
    """
    _check_times(s_tau, t, "g_joint")
    h = t - s_tau
    sin_a = math.sin(s.alpha)
    m2 = s.m[1]
    return _conditioned_radial(
        s_tau, h, s, q, lambda r: np.asarray(pi_hit(r * sin_a, h, m2)), (), "g_joint"
    )


def g_tail(s_tau: float, u: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Density of tau1 at s_tau jointly with tau2 > u, on {tau1 < tau2}; the time
    integral of g_joint over (u, inf) done in closed form through pi_survival.
    """
    _check_times(s_tau, u, "g_tail")
    h = u - s_tau
    sin_a = math.sin(s.alpha)
    m2 = s.m[1]
    return _conditioned_radial(
        s_tau, h, s, q, lambda r: np.asarray(pi_survival(r * sin_a, h, m2)), (), "g_tail"
    )


def l_kernel(s_tau: float, t: float, x: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Density of Z2(t) = x jointly with tau1 at s_tau and tau2 > t:
    the integral over r of f_exit(r, s_tau) pi_tilde(x, r sin alpha, t - s_tau, m2).
    """
    _check_times(s_tau, t, "l_kernel")
    if x <= 0.0:
        return DensityValue(0.0)
    h = t - s_tau
    sin_a = math.sin(s.alpha)
    m2 = s.m[1]
    root = math.sqrt(h)
    around = [(x + k * root) / sin_a for k in (-4.0, -1.0, 0.0, 1.0, 4.0)]
    return _conditioned_radial(
        s_tau, h, s, q, lambda r: np.asarray(pi_tilde(x, r * sin_a, h, m2)), around, "l_kernel"
    )


def p_kernel(x: float, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Density of Z2(t) = x jointly with tau1 < t < tau2: the time integral of l_kernel
    over (exit_onset, t), on a mesh graded towards s = t.
    """
    _positive(t, "t", "p_kernel")
    if x <= 0.0:
        return DensityValue(0.0)
    tracker = _Tracker()

    def integrand(times: np.ndarray) -> np.ndarray:
        out = np.empty(times.shape)
        for i, sigma in enumerate(times):
            value = l_kernel(float(sigma), t, x, s, q)
            tracker.add(value.quality)
            out[i] = value.value
        return out

    onset = exit_onset(s, q)
    if t <= onset:
        return DensityValue(0.0)
    result = integrate_1d(integrand, onset, t, q.outer(), singular_exponent=-0.5, singular_at="b", label="p_kernel")
    value, clamped = _clamp(result.value, "p_kernel")
    return tracker.result(value, result.error, clamped)


def singular_exponent(alpha: float) -> float:
    """Exponent of g_joint(s, t) ~ (t - s)^gamma as s -> t: gamma = pi / (2 alpha) - 1."""
    return math.pi / (2.0 * alpha) - 1.0


def g_integral(upper: float, t: float, s: WedgeState, q: QuadConfig = DEFAULT_QUAD) -> DensityValue:
    """
    Integral of g_joint(sigma, t) over sigma in (0, upper], upper <= t. The range
    below exit_onset carries no mass to tolerance and is skipped.

    With upper = t and alpha > pi/2 the integrand blows up like (t - sigma)^gamma;
    the substitution w = (t - sigma)^(gamma + 1) is applied.
    """
    if not (0.0 < upper <= t and math.isfinite(t)):
        raise DomainError(f"g_integral: need 0 < upper <= t, got upper={upper}, t={t}")
    tracker = _Tracker()

    def integrand(times: np.ndarray) -> np.ndarray:
        out = np.empty(times.shape)
        for i, sigma in enumerate(times):
            if sigma >= t:
                out[i] = 0.0
                continue
            value = g_joint(float(sigma), t, s, q)
            tracker.add(value.quality)
            out[i] = value.value
        return out

    onset = exit_onset(s, q)
    if upper <= onset:
        return DensityValue(0.0)
    gamma = singular_exponent(s.alpha)
    exponent = gamma if (upper == t and gamma < 0.0) else None
    result = integrate_1d(integrand, onset, upper, q.outer(), singular_exponent=exponent, singular_at="b", label="g_integral")
    value, clamped = _clamp(result.value, "g_integral")
    return tracker.result(value, result.error, clamped)


# ---------------------------------------------------------------------------
# method of images for alpha = pi / k
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _cached_reflections(k: int) -> ReflectionSet:
    return reflection_set(k)


def _reflections(s: WedgeState, k: int, label: str) -> ReflectionSet:
    if int(k) != k or k < 2:
        raise DomainError(f"{label}: k must be an integer >= 2, got {k}")
    if abs(s.alpha - math.pi / k) > 1e-9:
        raise DomainError(f"{label}: wedge angle {s.alpha:.12g} is not pi/{k}")
    return _cached_reflections(int(k))


def _image_kernel(origin: np.ndarray, points: np.ndarray, reflections: ReflectionSet, t: float) -> np.ndarray:
    """Psi((origin - S_j z) / sqrt(t)) for every point z and image j; shape (..., 2k)."""
    images = np.einsum("jab,...b->...ja", reflections.stacked(), points)
    return np.asarray(gauss2((origin - images) / math.sqrt(t)))


def surviving_position_reflect(z: np.ndarray, t: float, s: WedgeState, k: int) -> ArrayLike:
    """
    Surviving-position density P(Z(t) in dz, tau > t) / dz for alpha = pi / k:
    (1/t) sum_j (-1)^j Psi((z0 - S_j z) / sqrt(t)), times the drift tilt.
    """
    _positive(t, "t", "surviving_position_reflect")
    reflections = _reflections(s, k, "surviving_position_reflect")
    points = np.asarray(z, dtype=float)
    psi = _image_kernel(np.asarray(s.z), points, reflections, t)
    driftless = psi @ reflections.signs / t
    return _scalar(driftless * np.exp(s.log_tilt(points, t)))


def h_reflect(r: ArrayLike, theta: ArrayLike, t: float, s: WedgeState, k: int) -> ArrayLike:
    """Closed form of h_survive for alpha = pi / k (polar Jacobian r included)."""
    ra = np.asarray(r, dtype=float)
    th = np.asarray(theta, dtype=float)
    points = np.stack(np.broadcast_arrays(ra * np.cos(th), ra * np.sin(th)), axis=-1)
    return _scalar(ra * np.asarray(surviving_position_reflect(points, t, s, k)))


def b_reflect(r: ArrayLike, t: float, s: WedgeState, k: int) -> ArrayLike:
    """
    Closed form of b_series for alpha = pi / k.

    Both points are taken in the frame reflected across the bisector, where the exit
    edge is theta = 0: z~0 at angle alpha - theta0 and z~ = (r, 0). The flux is
    (1 / 2t^2) sum_j (-1)^j Psi((z~0 - S_j z~) / sqrt(t)) (z~0 . S_j e2).
    """
    _positive(t, "t", "b_reflect")
    reflections = _reflections(s, k, "b_reflect")
    ra = np.asarray(r, dtype=float)
    origin = s.r * np.array([math.cos(s.alpha - s.theta), math.sin(s.alpha - s.theta)])
    points = np.stack([ra, np.zeros_like(ra)], axis=-1)
    psi = _image_kernel(origin, points, reflections, t)
    normal_weights = reflections.stacked()[:, :, 1] @ origin
    return _scalar(psi @ (reflections.signs * normal_weights) / (2.0 * t * t))
