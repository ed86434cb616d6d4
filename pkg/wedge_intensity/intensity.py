"""
Intensity - Default intensities and conditional distributions under discrete observation.

Asset values are observed only at t_0 < t_1 < ...; between observations the market
knows the last observed values and whether (and when) each firm has defaulted. The
intensity of firm 2 at u in [t_j, t_{j+1}) is computed in the wedge frame restarted
at the observation z_{t_j}, with window-relative times u' = u - t_j. Firm 1 is
handled by the same formulas in the frame reflected across the wedge bisector.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .cache import SURVIVAL_CACHE, Cache, survival_key
from .config import worker_count
from .densities import (
    NEGATIVE_NOISE,
    DensityValue,
    EvalQuality,
    g_integral,
    g_joint,
    g_tail,
    l_kernel,
    p_kernel,
    pi_hit,
    pi_survival,
    pi_tilde,
    survival_prob,
)
from .errors import DegenerateConditioningError, DomainError, InvalidStateError
from .geometry import ModelParams, WedgeState, state_at, tilde_model
from .quadrature import DEFAULT_QUAD, QuadConfig
from .regime import Regime, RegimeTag
from .scenario import Scenario

logger = logging.getLogger(__name__)

# right limit used at observation and default instants
OBSERVATION_EPSILON = 1e-9
DENOMINATOR_FLOOR = 1e-14
_SMALLEST_TOL = 1e-300

XPair = Tuple[Optional[float], Optional[float]]


@dataclass(frozen=True)
class InformationState:
    """
    What the market knows at time as_of.

    Attributes:
        obs_times: Observation times t_0 < t_1 < ...
        last_obs_index: j with t_j <= as_of < t_{j+1}.
        x_obs: Observed log-distances (x1, x2) at t_j; None for a firm already in
            default at t_j.
        as_of: Current time u.
        default_time_1: Default time of firm 1, if it has defaulted by as_of.
        default_time_2: Default time of firm 2, if it has defaulted by as_of.
    """
    obs_times: Tuple[float, ...]
    last_obs_index: int
    x_obs: XPair
    as_of: float
    default_time_1: Optional[float] = None
    default_time_2: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "obs_times", tuple(float(t) for t in self.obs_times))
        object.__setattr__(self, "x_obs", tuple(self.x_obs))
        times = self.obs_times
        if not times or any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise InvalidStateError(f"obs_times must be strictly increasing, got {list(times)}")
        j = self.last_obs_index
        if not 0 <= j < len(times):
            raise InvalidStateError(f"last_obs_index {j} outside 0..{len(times) - 1}")
        if self.as_of < times[j] or (j + 1 < len(times) and self.as_of >= times[j + 1]):
            raise InvalidStateError(
                f"as_of={self.as_of} not in the window [{times[j]}, "
                f"{times[j + 1] if j + 1 < len(times) else 'inf'})"
            )
        for firm in (1, 2):
            default = self.default_time(firm)
            x = self.x_obs[firm - 1]
            if default is not None and default > self.as_of:
                raise InvalidStateError(f"firm {firm} default at {default} is after as_of={self.as_of}")
            if default is not None and default < self.t_j and x is not None:
                raise InvalidStateError(f"firm {firm} defaulted at {default} before t_j={self.t_j} but is observed")
            if (default is None or default > self.t_j) and (x is None or not x > 0.0):
                raise InvalidStateError(f"firm {firm} is alive at t_j={self.t_j} and needs a positive observation, got {x}")

    @property
    def t_j(self) -> float:
        return self.obs_times[self.last_obs_index]

    @property
    def elapsed(self) -> float:
        """Window-relative time u - t_j."""
        return self.as_of - self.t_j

    def default_time(self, firm: int) -> Optional[float]:
        if firm not in (1, 2):
            raise DomainError(f"firm must be 1 or 2, got {firm}")
        return self.default_time_1 if firm == 1 else self.default_time_2

    def advanced_to(self, u: float) -> "InformationState":
        """The same information evaluated at u (validated against the window)."""
        return self if u == self.as_of else replace(self, as_of=u)

    def z_obs(self, model: ModelParams) -> Tuple[Optional[float], Optional[float]]:
        """
        Observed z at t_j: z1 needs both firms observed, z2 only firm 2.
        """
        x1, x2 = self.x_obs
        z2 = None if x2 is None else x2 / model.sigma2
        if x1 is None or x2 is None:
            return (None, z2)
        z = model.to_z((x1, x2))
        return (float(z[0]), float(z[1]))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class IntensitySample:
    """One evaluation point of the intensity path."""
    u: float
    lambda1: Optional[float]
    lambda2: Optional[float]
    regime1: Regime
    regime2: Regime
    quality: EvalQuality = field(default_factory=EvalQuality)

    def value(self, firm: int) -> Optional[float]:
        return self.lambda1 if firm == 1 else self.lambda2

    def to_dict(self) -> Dict[str, Any]:
        return {
            "u": self.u,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "regime1": str(self.regime1),
            "regime2": str(self.regime2),
            "quality": self.quality.to_dict(),
        }


def regime_of(firm: int, info: InformationState) -> Regime:
    """
    Regime of the given firm under the information state.

    Raises:
        DomainError: firm not 1 or 2.
        InvalidStateError: default times inconsistent with the window.
    """
    own = info.default_time(firm)
    other = info.default_time(3 - firm)
    if own is not None:
        return Regime(RegimeTag.TARGET_DEFAULTED)
    if other is None:
        return Regime(RegimeTag.BOTH_ALIVE)
    if other > info.as_of:
        raise InvalidStateError(f"default at {other} lies after the evaluation time {info.as_of}")
    if other >= info.t_j:
        return Regime(RegimeTag.CO_DEFAULT_IN_WINDOW, s=other)
    return Regime(RegimeTag.CO_DEFAULT_BEFORE_WINDOW)


@dataclass(frozen=True)
class _Frame:
    """Wedge frame in which the target firm defaults on the theta = 0 edge."""
    state: Optional[WedgeState]
    original: Optional[WedgeState]
    level: float
    drift: float


def _frame(firm: int, info: InformationState, model: ModelParams) -> _Frame:
    x = info.x_obs
    sigma = model.sigma[firm - 1]
    target_x = x[firm - 1]
    if target_x is None:
        raise InvalidStateError(f"firm {firm} is not observed at t_j={info.t_j}")
    level = target_x / sigma
    drift = model.mu[firm - 1] / sigma
    if x[0] is None or x[1] is None:
        return _Frame(None, None, level, drift)
    original = state_at(model, (x[0], x[1]))
    state = original if firm == 2 else tilde_model(replace(model, x0=(x[0], x[1])))
    return _Frame(state, original, level, drift)


def _survival(state: WedgeState, elapsed: float, q: QuadConfig, cache: Optional[Cache]) -> DensityValue:
    if cache is None:
        return survival_prob(elapsed, state, q)
    return cache.get_or_compute(survival_key(state, elapsed, q), lambda: survival_prob(elapsed, state, q))


def _ratio(numerator: float, denominator: float, label: str, quality: EvalQuality) -> DensityValue:
    if not denominator >= DENOMINATOR_FLOOR:
        raise DegenerateConditioningError(label, denominator)
    value = numerator / denominator
    clamped = numerator < -NEGATIVE_NOISE
    if clamped:
        logger.warning("%s: negative numerator %.3g clamped", label, numerator)
    return DensityValue(max(value, 0.0), replace(quality, clamped=quality.clamped or clamped))


def _scaled_to(q: QuadConfig, bound: float) -> QuadConfig:
    """q with the absolute floor shrunk in proportion to a known bound of the integral."""
    if not 0.0 < bound < 1.0:
        return q
    return replace(q, abs_tol=max(q.abs_tol * bound, _SMALLEST_TOL))


def _window_times(info: InformationState, label: str) -> float:
    elapsed = info.elapsed
    if not elapsed > 0.0:
        raise DomainError(
            f"{label}: u={info.as_of} equals the observation time t_j; "
            f"evaluate at u + {OBSERVATION_EPSILON} (right limit)"
        )
    return elapsed


def _in_window_offset(regime: Regime, info: InformationState) -> float:
    assert regime.s is not None
    return regime.s - info.t_j


def _hazard(firm: int, info: InformationState, model: ModelParams, q: QuadConfig, cache: Optional[Cache]) -> Tuple[Optional[DensityValue], Regime]:
    regime = regime_of(firm, info)
    if not regime.alive:
        return None, regime
    label = f"lambda{firm}"
    elapsed = _window_times(info, label)
    frame = _frame(firm, info, model)

    if regime.tag is RegimeTag.BOTH_ALIVE:
        assert frame.state is not None and frame.original is not None
        state = frame.state
        hit = float(pi_hit(state.z[1], elapsed, state.m[1]))
        # the integral is at most hit, so its absolute floor follows hit
        joint = g_integral(elapsed, elapsed, state, _scaled_to(q, hit))
        survival = _survival(frame.original, elapsed, q, cache)
        quality = joint.quality.merge(survival.quality)
        return _ratio(hit - float(joint.value), float(survival.value), label, quality), regime

    if regime.tag is RegimeTag.CO_DEFAULT_IN_WINDOW:
        offset = _in_window_offset(regime, info)
        if offset > 0.0:
            assert frame.state is not None
            if offset >= elapsed:
                raise DomainError(f"{label}: other firm defaulted at u={info.as_of}; evaluate at the right limit")
            joint = g_joint(offset, elapsed, frame.state, q)
            tail = g_tail(offset, elapsed, frame.state, q)
            return _ratio(float(joint.value), float(tail.value), label, joint.quality.merge(tail.quality)), regime

    # the other firm is gone: the target restarts as a single name from its observed level
    hit = float(pi_hit(frame.level, elapsed, frame.drift))
    survival = float(pi_survival(frame.level, elapsed, frame.drift))
    return _ratio(hit, survival, label, EvalQuality()), regime


def _sample(
    u: float,
    info: InformationState,
    model: ModelParams,
    q: QuadConfig,
    cache: Optional[Cache],
    firms: Sequence[int],
) -> IntensitySample:
    info = info.advanced_to(u)
    values: Dict[int, Optional[float]] = {1: None, 2: None}
    regimes = {1: regime_of(1, info), 2: regime_of(2, info)}
    quality = EvalQuality()
    for firm in firms:
        result, regimes[firm] = _hazard(firm, info, model, q, cache)
        if result is not None:
            values[firm] = float(result.value)
            quality = quality.merge(result.quality)
    return IntensitySample(u, values[1], values[2], regimes[1], regimes[2], quality)


def lambda2(
    u: float,
    info: InformationState,
    model: ModelParams,
    q: QuadConfig = DEFAULT_QUAD,
    cache: Optional[Cache] = SURVIVAL_CACHE,
) -> IntensitySample:
    """
    Default intensity of firm 2 at time u.

    BothAlive: [pi(z2, u') - int_0^u' g(s, u') ds] / P(tau > u').
    CoDefaultInWindow(s): g(s', u') / g_tail(s', u').
    CoDefaultBeforeWindow: single-name hazard pi / pi_survival of firm 2.

    Args:
        u: Evaluation time, strictly after the last observation time.
        info: Information state (re-evaluated at u).
        model: Model parameters.
        q: Numerical configuration.
        cache: Memo for survival denominators (None disables it).

    Returns:
        IntensitySample with lambda2 set (None if firm 2 has defaulted).

    Raises:
        DegenerateConditioningError: a conditioning denominator below 1e-14.
        DomainError: u equal to the observation time t_j.
    """
    return _sample(u, info, model, q, cache, (2,))


def lambda1(
    u: float,
    info: InformationState,
    model: ModelParams,
    q: QuadConfig = DEFAULT_QUAD,
    cache: Optional[Cache] = SURVIVAL_CACHE,
) -> IntensitySample:
    """Default intensity of firm 1: the lambda2 formulas in the reflected frame."""
    return _sample(u, info, model, q, cache, (1,))


def _alive_frame(firm: int, info: InformationState, model: ModelParams, label: str) -> Tuple[Regime, float, _Frame]:
    regime = regime_of(firm, info)
    if not regime.alive:
        raise InvalidStateError(f"{label}: firm {firm} has already defaulted")
    return regime, _window_times(info, label), _frame(firm, info, model)


def conditional_default_density(
    v: float,
    info: InformationState,
    model: ModelParams,
    q: QuadConfig = DEFAULT_QUAD,
    firm: int = 2,
    cache: Optional[Cache] = SURVIVAL_CACHE,
) -> DensityValue:
    """
    Density at v > u of the firm's default time given the information at u.

    BothAlive: [pi(z2, v') - int_0^u' g(s, v') ds] / P(tau > u').
    CoDefaultInWindow(s): g(s', v') / g_tail(s', u').
    Otherwise the single-name density pi(z2, v') / pi_survival(z2, u').
    """
    label = "conditional_default_density"
    regime, elapsed, frame = _alive_frame(firm, info, model, label)
    if not v > info.as_of:
        raise DomainError(f"{label}: need v > u={info.as_of}, got {v}")
    future = v - info.t_j

    if regime.tag is RegimeTag.BOTH_ALIVE:
        assert frame.state is not None and frame.original is not None
        state = frame.state
        hit = float(pi_hit(state.z[1], future, state.m[1]))
        joint = g_integral(elapsed, future, state, q)
        survival = _survival(frame.original, elapsed, q, cache)
        return _ratio(hit - float(joint.value), float(survival.value), label, joint.quality.merge(survival.quality))

    if regime.tag is RegimeTag.CO_DEFAULT_IN_WINDOW:
        offset = _in_window_offset(regime, info)
        if offset > 0.0:
            assert frame.state is not None
            joint = g_joint(offset, future, frame.state, q)
            tail = g_tail(offset, elapsed, frame.state, q)
            return _ratio(float(joint.value), float(tail.value), label, joint.quality.merge(tail.quality))

    hit = float(pi_hit(frame.level, future, frame.drift))
    survival = float(pi_survival(frame.level, elapsed, frame.drift))
    return _ratio(hit, survival, label, EvalQuality())


def conditional_asset_density(
    x: float,
    info: InformationState,
    model: ModelParams,
    q: QuadConfig = DEFAULT_QUAD,
    firm: int = 2,
    cache: Optional[Cache] = SURVIVAL_CACHE,
) -> DensityValue:
    """
    Density of the firm's asset level at u, in unit-diffusion units (X_i / sigma_i),
    given the information at u.

    BothAlive: [pi_tilde(x, z2, u') - p(x, u')] / P(tau > u').
    CoDefaultInWindow(s): l(s', u', x) / g_tail(s', u').
    Otherwise pi_tilde(x, z2, u') / pi_survival(z2, u').
    """
    label = "conditional_asset_density"
    if x < 0.0 or not math.isfinite(x):
        raise DomainError(f"{label}: level must be finite and >= 0, got {x}")
    regime, elapsed, frame = _alive_frame(firm, info, model, label)
    if x == 0.0:
        return DensityValue(0.0)

    if regime.tag is RegimeTag.BOTH_ALIVE:
        assert frame.state is not None and frame.original is not None
        state = frame.state
        free = float(pi_tilde(x, state.z[1], elapsed, state.m[1]))
        absorbed = p_kernel(x, elapsed, state, q)
        survival = _survival(frame.original, elapsed, q, cache)
        return _ratio(free - float(absorbed.value), float(survival.value), label, absorbed.quality.merge(survival.quality))

    if regime.tag is RegimeTag.CO_DEFAULT_IN_WINDOW:
        offset = _in_window_offset(regime, info)
        if offset > 0.0:
            assert frame.state is not None
            kernel = l_kernel(offset, elapsed, x, frame.state, q)
            tail = g_tail(offset, elapsed, frame.state, q)
            return _ratio(float(kernel.value), float(tail.value), label, kernel.quality.merge(tail.quality))

    free = float(pi_tilde(x, frame.level, elapsed, frame.drift))
    survival = float(pi_survival(frame.level, elapsed, frame.drift))
    return _ratio(free, survival, label, EvalQuality())


def evaluation_time(scenario: Scenario, u: float) -> float:
    """u, or its right limit when u coincides with an observation or default instant."""
    instants = [*scenario.obs_times, *(event.time for event in scenario.default_events)]
    if any(u == t for t in instants):
        return u + OBSERVATION_EPSILON
    return u


def information_state(scenario: Scenario, u: float) -> InformationState:
    """
    Information available at u under the scenario's observations and defaults.

    Raises:
        InvalidStateError: u before the first observation time.
    """
    times = scenario.obs_times
    if u < times[0]:
        raise InvalidStateError(f"u={u} precedes the first observation time {times[0]}")
    j = max(i for i, t in enumerate(times) if t <= u)
    t_j = times[j]
    defaults: Dict[int, Optional[float]] = {1: None, 2: None}
    for event in scenario.default_events:
        if event.time <= u:
            defaults[event.firm] = event.time
    x = list(scenario.observation_at(t_j))
    for firm in (1, 2):
        default = defaults[firm]
        if default is not None and default <= t_j:
            x[firm - 1] = None
    return InformationState(
        obs_times=tuple(times),
        last_obs_index=j,
        x_obs=(x[0], x[1]),
        as_of=u,
        default_time_1=defaults[1],
        default_time_2=defaults[2],
    )


def _evaluate_point(scenario: Scenario, q: QuadConfig, u: float) -> IntensitySample:
    u_eval = evaluation_time(scenario, u)
    info = information_state(scenario, u_eval)
    sample = _sample(u_eval, info, scenario.model, q, SURVIVAL_CACHE, (1, 2))
    return replace(sample, u=u)


def intensity_path(
    scenario: Scenario,
    grid: Optional[Sequence[float]] = None,
    q: QuadConfig = DEFAULT_QUAD,
    workers: Optional[int] = 1,
) -> List[IntensitySample]:
    """
    lambda1 and lambda2 along a time grid.

    Each point gets the information state in force at that time; grid points at
    observation or default instants are evaluated as right limits u + 1e-9.

    Args:
        scenario: Model, observations and default events.
        grid: Strictly increasing times; defaults to the scenario grid.
        q: Numerical configuration.
        workers: Process count; None reads WEDGE_INTENSITY_THREADS.

    Returns:
        One IntensitySample per grid point, in grid order.
    """
    points = list(scenario.grid.points() if grid is None else grid)
    if any(b <= a for a, b in zip(points[:-1], points[1:])):
        raise DomainError("intensity_path: grid must be strictly increasing")
    n_workers = min(worker_count(workers), max(len(points), 1))
    logger.info("intensity path '%s': %d points, %d workers", scenario.name, len(points), n_workers)

    evaluate = partial(_evaluate_point, scenario, q)
    if n_workers <= 1:
        return [evaluate(u) for u in points]
    with ProcessPoolExecutor(max_workers=n_workers) as executor:
        return list(executor.map(evaluate, points))


def compensator(samples: Sequence[IntensitySample], firm: int) -> np.ndarray:
    """
    Integrated intensity along a path, by the trapezoidal rule.

    Points where the firm has defaulted contribute a zero rate.
    """
    if firm not in (1, 2):
        raise DomainError(f"firm must be 1 or 2, got {firm}")
    times = np.array([s.u for s in samples], dtype=float)
    rates = np.array([s.value(firm) or 0.0 for s in samples], dtype=float)
    if times.size == 0:
        return times
    return cumulative_trapezoid(rates, times, initial=0.0)
