"""
Quadrature - Adaptive Gauss-Kronrod integration with error estimates.

Every panel is integrated with the 7-point Gauss / 15-point Kronrod pair; the
difference of the two is the panel's error estimate. Panels are refined
worst-first from a global heap until the summed estimate meets the tolerance.
Results are deterministic: panels are ordered by a counter tie-break and summed
with math.fsum in left-to-right order.
"""

import heapq
import itertools
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, QuadratureError
from .special_fn import SeriesBudget

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]
WedgeIntegrand = Callable[[np.ndarray, float], np.ndarray]

# Kronrod abscissae and weights on [0, 1], QUADPACK qk15 ordering (outermost first)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# Gauss weights for the abscissae _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_gauss_half = np.zeros(8)
_gauss_half[[1, 3, 5, 7]] = _WG
GAUSS_WEIGHTS = np.concatenate([_gauss_half[:-1], _gauss_half[::-1]])

_EPS = np.finfo(float).eps
_MAX_TAIL_PANELS = 96


@dataclass(frozen=True)
class QuadConfig:
    """
    Tolerances and caps governing every numerical evaluation.

    Attributes:
        rel_tol: Relative tolerance of every quadrature.
        abs_tol: Absolute tolerance floor.
        max_depth: Maximum bisection depth of a single panel.
        tail_sigma: Gaussian truncation multiplier for radial domains.
        series_rel_tol: Relative tolerance of the Bessel n-series.
        series_max_terms: Term cap of the Bessel n-series.
        max_panels: Cap on the number of live panels per integral.
        prefer_closed_forms: Use the reflection closed forms of the exit and surviving
            densities when the wedge angle is pi/k; a drift enters through the
            exponential tilt. Other angles always use the Bessel series.
    """
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_depth: int = 40
    tail_sigma: float = 8.5
    series_rel_tol: float = 1e-12
    series_max_terms: int = 400
    max_panels: int = 2000
    prefer_closed_forms: bool = True

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "tail_sigma", "series_rel_tol"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise DomainError(f"QuadConfig.{name} must be positive, got {value}")
        if self.max_depth < 4:
            raise DomainError(f"QuadConfig.max_depth must be >= 4, got {self.max_depth}")
        if self.max_panels < 1:
            raise DomainError(f"QuadConfig.max_panels must be >= 1, got {self.max_panels}")
        # SeriesBudget validates the series fields
        SeriesBudget(self.series_rel_tol, self.series_max_terms)

    @property
    def series_budget(self) -> SeriesBudget:
        return SeriesBudget(self.series_rel_tol, self.series_max_terms)

    def outer(self) -> "QuadConfig":
        """Relaxed copy for the outer level of a nested quadrature."""
        return replace(self, rel_tol=min(self.rel_tol * 100.0, 1e-3), abs_tol=self.abs_tol * 100.0)

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QuadConfig":
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        unknown = set(data) - set(known)
        if unknown:
            raise DomainError(f"Unknown QuadConfig fields: {sorted(unknown)}")
        return cls(**known)


DEFAULT_QUAD = QuadConfig()


class QuadResult(NamedTuple):
    """Integral value and its error estimate."""
    value: float
    error: float


@dataclass(order=True)
class _Panel:
    priority: float
    order: int
    a: float
    b: float
    value: float
    error: float
    depth: int


def _kronrod_panels(f: Integrand, intervals: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """(value, error) of every interval from a single call of f on all their nodes."""
    bounds = np.asarray(intervals, dtype=float).reshape(-1, 2)
    centers = 0.5 * (bounds[:, 0] + bounds[:, 1])
    halves = 0.5 * (bounds[:, 1] - bounds[:, 0])
    nodes = centers[:, None] + halves[:, None] * NODES[None, :]
    fx = np.asarray(f(nodes.ravel()), dtype=float)
    if fx.shape != (nodes.size,):
        raise DomainError(f"integrand returned shape {fx.shape}, expected {(nodes.size,)}")
    fx = fx.reshape(nodes.shape)
    if not np.all(np.isfinite(fx)):
        bad = int(np.argmin(np.all(np.isfinite(fx), axis=1)))
        a, b = bounds[bad]
        raise DomainError(f"integrand is not finite on ({a:.6g}, {b:.6g})")
    kronrod = halves * (fx @ KRONROD_WEIGHTS)
    gauss = halves * (fx @ GAUSS_WEIGHTS)
    magnitude = np.abs(halves) * (np.abs(fx) @ KRONROD_WEIGHTS)
    errors = np.maximum(np.abs(kronrod - gauss), 50.0 * _EPS * magnitude)
    return [(float(v), float(e)) for v, e in zip(kronrod, errors)]


def _adaptive(f: Integrand, edges: Sequence[float], q: QuadConfig, label: str) -> QuadResult:
    counter = itertools.count()
    heap: List[_Panel] = []
    initial = list(zip(edges[:-1], edges[1:]))
    for (a, b), (value, error) in zip(initial, _kronrod_panels(f, initial)):
        heapq.heappush(heap, _Panel(-error, next(counter), a, b, value, error, 0))

    total = math.fsum(p.value for p in heap)
    total_error = math.fsum(p.error for p in heap)
    while total_error > q.tolerance(total):
        worst = heap[0]
        if worst.depth >= q.max_depth or len(heap) >= q.max_panels:
            raise QuadratureError(
                f"{label}: no convergence on [{edges[0]:.6g}, {edges[-1]:.6g}] after "
                f"{len(heap)} panels",
                total,
                total_error,
            )
        heapq.heappop(heap)
        mid = 0.5 * (worst.a + worst.b)
        halves = [(worst.a, mid), (mid, worst.b)]
        for (a, b), (value, error) in zip(halves, _kronrod_panels(f, halves)):
            heapq.heappush(heap, _Panel(-error, next(counter), a, b, value, error, worst.depth + 1))
        total = math.fsum(p.value for p in heap)
        total_error = math.fsum(p.error for p in heap)

    panels = sorted(heap, key=lambda p: p.a)
    logger.debug("%s: %d panels, error %.3g", label, len(panels), total_error)
    return QuadResult(math.fsum(p.value for p in panels), total_error)


def _edges(a: float, b: float, points: Optional[Sequence[float]]) -> List[float]:
    inner = sorted({float(p) for p in (points or ()) if a < p < b})
    return [a, *inner, b]


def _substituted(
    f: Integrand, a: float, b: float, exponent: float, singular_at: str
) -> Tuple[Integrand, float, Callable[[float], float]]:
    """Map f on [a, b] to a bounded integrand on [0, (b-a)^(1/p)], p = 1/(exponent+1)."""
    power = 1.0 / (exponent + 1.0)
    sign = -1.0 if singular_at == "b" else 1.0
    anchor = b if singular_at == "b" else a

    def g(w: np.ndarray) -> np.ndarray:
        return f(anchor + sign * w**power) * power * w ** (power - 1.0)

    def to_w(s: float) -> float:
        return abs(s - anchor) ** (1.0 / power)

    return g, (b - a) ** (1.0 / power), to_w


def integrate_1d(
    f: Integrand,
    a: float,
    b: float,
    q: QuadConfig = DEFAULT_QUAD,
    singular_exponent: Optional[float] = None,
    singular_at: str = "b",
    points: Optional[Sequence[float]] = None,
    scale: float = 1.0,
    label: str = "integrate_1d",
) -> QuadResult:
    """
    Adaptive integral of a vectorised integrand over [a, b].

    Args:
        f: Integrand, called with an array of abscissae and returning an array.
        a: Lower limit.
        b: Upper limit, may be math.inf.
        q: Tolerances and caps.
        singular_exponent: gamma in (-1, 0] with f ~ (b - s)^gamma near the singular end;
            the substitution w = (b - s)^(gamma + 1) is applied first.
        singular_at: Which end carries the singularity, "a" or "b".
        points: Interior breakpoints where f changes scale.
        scale: Width of the first panel of a semi-infinite domain.
        label: Operation name used in errors and logs.

    Returns:
        QuadResult(value, error).

    Raises:
        QuadratureError: tolerance not met within max_depth / max_panels.
        DomainError: bad limits or a non-finite integrand value.
    """
    if not (a < b) or math.isnan(a) or math.isinf(a):
        raise DomainError(f"{label}: need finite a < b, got a={a}, b={b}")

    if math.isinf(b):
        if singular_exponent is not None and singular_at == "b":
            raise DomainError(f"{label}: a singular end at +inf is not supported")
        return _integrate_tail(f, a, q, singular_exponent, points, scale, label)

    if singular_exponent is not None and singular_exponent != 0.0:
        if not -1.0 < singular_exponent <= 0.0:
            raise DomainError(f"{label}: singular exponent must lie in (-1, 0], got {singular_exponent}")
        if singular_at not in ("a", "b"):
            raise DomainError(f"{label}: singular_at must be 'a' or 'b', got {singular_at!r}")
        g, width, to_w = _substituted(f, a, b, singular_exponent, singular_at)
        mapped = [to_w(p) for p in (points or ()) if a < p < b]
        return _adaptive(g, _edges(0.0, width, mapped), q, label)

    return _adaptive(f, _edges(a, b, points), q, label)


def _integrate_tail(
    f: Integrand,
    a: float,
    q: QuadConfig,
    singular_exponent: Optional[float],
    points: Optional[Sequence[float]],
    scale: float,
    label: str,
) -> QuadResult:
    """
    Integral over [a, inf) as a sum of doubling panels.

    Stops once the geometric extrapolation of the remaining panels,
    c * rho / (1 - rho), is below half the tolerance.
    """
    if not scale > 0.0:
        raise DomainError(f"{label}: scale must be positive, got {scale}")
    values: List[float] = []
    errors: List[float] = []
    lo, width = a, scale
    previous: Optional[float] = None
    for index in range(_MAX_TAIL_PANELS):
        hi = lo + width
        inner = [p for p in (points or ()) if lo < p < hi]
        if index == 0 and singular_exponent is not None:
            part = integrate_1d(f, lo, hi, q, singular_exponent, "a", inner, label=label)
        else:
            part = integrate_1d(f, lo, hi, q, points=inner, label=label)
        values.append(part.value)
        errors.append(part.error)
        total = math.fsum(values)

        current = abs(part.value)
        if previous is not None:
            if current == 0.0 and previous == 0.0:
                tail = 0.0
            elif previous > 0.0 and current < previous:
                ratio = current / previous
                tail = current * ratio / (1.0 - ratio)
            else:
                tail = math.inf
            if tail <= 0.5 * q.tolerance(total) and (points is None or hi > max(points, default=a)):
                logger.debug("%s: tail closed after %d panels at %.6g", label, index + 1, hi)
                return QuadResult(total, math.fsum(errors) + tail)
        previous = current
        lo, width = hi, 2.0 * width

    raise QuadratureError(f"{label}: semi-infinite tail did not decay", math.fsum(values), math.inf)


def integrate_wedge(
    f: WedgeIntegrand,
    alpha: float,
    r_hi: float,
    q: QuadConfig = DEFAULT_QUAD,
    r_points: Optional[Sequence[float]] = None,
    theta_points: Optional[Sequence[float]] = None,
    label: str = "integrate_wedge",
) -> QuadResult:
    """
    Integral of f(r, theta) dr dtheta over the polar rectangle (0, r_hi) x (0, alpha).

    The radial integral is adaptive for each angular node; the angular integral is
    adaptive over those values at the relaxed outer tolerance. The polar Jacobian
    is the integrand's business.

    Args:
        f: Integrand called as f(r_array, theta).
        alpha: Wedge angle in (0, pi).
        r_hi: Radial truncation.
        q: Tolerances; the angular level uses q.outer().
        r_points: Radial breakpoints.
        theta_points: Angular breakpoints.
        label: Operation name used in errors and logs.
    """
    if not 0.0 < alpha < math.pi:
        raise DomainError(f"{label}: alpha must lie in (0, pi), got {alpha}")
    if not r_hi > 0.0:
        raise DomainError(f"{label}: r_hi must be positive, got {r_hi}")

    inner_error = [0.0]

    def radial(theta_nodes: np.ndarray) -> np.ndarray:
        out = np.empty(theta_nodes.shape, dtype=float)
        for i, theta in enumerate(theta_nodes):
            part = integrate_1d(
                lambda r: f(r, float(theta)), 0.0, r_hi, q, points=r_points, label=f"{label}/r"
            )
            out[i] = part.value
            inner_error[0] = max(inner_error[0], part.error)
        return out

    outer = integrate_1d(radial, 0.0, alpha, q.outer(), points=theta_points, label=f"{label}/theta")
    return QuadResult(outer.value, outer.error + alpha * inner_error[0])
