"""
Scenario - Model, observation schedule and default history for one run.

Scenarios are read from JSON files or picked from the built-in registry of
figure scenarios. Observations are log-distances to default X; times are in
years.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from .errors import ConfigError, WedgeIntensityError
from .geometry import ModelParams
from .montecarlo import SimConfig
from .quadrature import DEFAULT_QUAD, QuadConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    """Observed log-distances at one observation time; None for a defaulted firm."""
    t: float
    x1: Optional[float] = None
    x2: Optional[float] = None

    def value(self, firm: int) -> Optional[float]:
        return self.x1 if firm == 1 else self.x2

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "x1": self.x1, "x2": self.x2}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Observation":
        return cls(t=float(data["t"]), x1=_optional_float(data.get("x1")), x2=_optional_float(data.get("x2")))


@dataclass(frozen=True)
class DefaultEvent:
    """Observed default of one firm."""
    firm: int
    time: float

    def to_dict(self) -> Dict[str, Any]:
        return {"firm": self.firm, "time": self.time}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DefaultEvent":
        return cls(firm=int(data["firm"]), time=float(data["time"]))


@dataclass(frozen=True)
class TimeGrid:
    """Evenly spaced evaluation times start, start + step, ..., stop."""
    start: float
    stop: float
    step: float

    def __post_init__(self) -> None:
        if not self.step > 0.0 or self.stop < self.start:
            raise ConfigError(f"invalid grid {self.start}:{self.stop}:{self.step}")

    def points(self) -> List[float]:
        count = int(round((self.stop - self.start) / self.step))
        # rounding keeps grid points equal to observation and default instants
        points = [round(self.start + i * self.step, 12) for i in range(count + 1)]
        return [p for p in points if p <= self.stop + 1e-12]

    @classmethod
    def parse(cls, text: str) -> "TimeGrid":
        """Parse 'start:stop:step'."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:step, got '{text}'")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as e:
            raise ConfigError(f"grid must be numeric, got '{text}'") from e
        return cls(start, stop, step)

    def to_dict(self) -> Dict[str, Any]:
        return {"start": self.start, "stop": self.stop, "step": self.step}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TimeGrid":
        return cls(start=float(data["start"]), stop=float(data["stop"]), step=float(data["step"]))


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class Scenario:
    """
    Everything needed to evaluate intensities for one two-firm setting.

    Attributes:
        name: Scenario name, used for output files.
        model: Model parameters.
        obs_times: Increasing observation times; the first one is the model start.
        observations: Observed X values at observation times.
        default_events: At most one default per firm.
        grid: Evaluation grid.
        description: Free text.
        quad: Numerical configuration override.
        sim: Monte Carlo configuration override.
    """
    name: str
    model: ModelParams
    obs_times: Tuple[float, ...] = (0.0,)
    observations: Tuple[Observation, ...] = ()
    default_events: Tuple[DefaultEvent, ...] = ()
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.25, 9.75, 0.25))
    description: str = ""
    quad: Optional[QuadConfig] = None
    sim: Optional[SimConfig] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "obs_times", tuple(float(t) for t in self.obs_times))
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "default_events", tuple(self.default_events))
        self._validate()

    def _validate(self) -> None:
        times = self.obs_times
        if not times:
            raise ConfigError(f"scenario '{self.name}': obs_times must not be empty")
        if any(b <= a for a, b in zip(times[:-1], times[1:])):
            raise ConfigError(f"scenario '{self.name}': obs_times must be strictly increasing")

        firms = [event.firm for event in self.default_events]
        if any(firm not in (1, 2) for firm in firms) or len(set(firms)) != len(firms):
            raise ConfigError(f"scenario '{self.name}': at most one default per firm 1 or 2, got {firms}")
        for event in self.default_events:
            if event.time <= times[0]:
                raise ConfigError(
                    f"scenario '{self.name}': default of firm {event.firm} at {event.time} "
                    f"is not after the start {times[0]}"
                )

        seen = set()
        for obs in self.observations:
            if obs.t not in times:
                raise ConfigError(f"scenario '{self.name}': observation at t={obs.t} is not an observation time")
            if obs.t in seen:
                raise ConfigError(f"scenario '{self.name}': duplicate observation at t={obs.t}")
            seen.add(obs.t)
            for firm in (1, 2):
                value = obs.value(firm)
                if value is None:
                    continue
                if not value > 0.0:
                    raise ConfigError(f"scenario '{self.name}': x{firm} at t={obs.t} must be positive, got {value}")
                default = self.default_time(firm)
                if default is not None and default <= obs.t:
                    raise ConfigError(
                        f"scenario '{self.name}': firm {firm} observed at t={obs.t} after its default at {default}"
                    )

        # observation times after the grid only delimit the last window
        for t in (t for t in times if t <= self.grid.stop):
            x = self.observation_at(t)
            for firm in (1, 2):
                default = self.default_time(firm)
                if x[firm - 1] is None and (default is None or default > t):
                    raise ConfigError(f"scenario '{self.name}': firm {firm} alive at t={t} but not observed")

    def default_time(self, firm: int) -> Optional[float]:
        for event in self.default_events:
            if event.firm == firm:
                return event.time
        return None

    def observation_at(self, t: float) -> Tuple[Optional[float], Optional[float]]:
        """X values observed at t; the start falls back to x0 when no observation is given."""
        for obs in self.observations:
            if obs.t == t:
                return (obs.x1, obs.x2)
        if t == self.obs_times[0]:
            return self.model.x0
        return (None, None)

    @property
    def quad_config(self) -> QuadConfig:
        return self.quad if self.quad is not None else DEFAULT_QUAD

    @property
    def sim_config(self) -> SimConfig:
        return self.sim if self.sim is not None else SimConfig()

    def with_model(self, model: ModelParams, name: Optional[str] = None) -> "Scenario":
        return replace(self, model=model, name=name or self.name)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "name": self.name,
            "description": self.description,
            "model": self.model.to_dict(),
            "obs_times": list(self.obs_times),
            "observations": [obs.to_dict() for obs in self.observations],
            "default_events": [event.to_dict() for event in self.default_events],
            "grid": self.grid.to_dict(),
        }
        if self.quad is not None:
            data["quad"] = self.quad.to_dict()
        if self.sim is not None:
            data["sim"] = self.sim.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scenario":
        """
        Build a scenario from its JSON form.

        Raises:
            ConfigError: missing fields, wrong types or inconsistent data.
        """
        if not isinstance(data, dict):
            raise ConfigError(f"scenario must be a JSON object, got {type(data).__name__}")
        name = str(data.get("name", "scenario"))
        try:
            return cls(
                name=name,
                model=ModelParams.from_dict(data["model"]),
                obs_times=tuple(float(t) for t in data.get("obs_times", [0.0])),
                observations=tuple(Observation.from_dict(o) for o in data.get("observations", [])),
                default_events=tuple(DefaultEvent.from_dict(e) for e in data.get("default_events", [])),
                grid=TimeGrid.from_dict(data["grid"]) if "grid" in data else TimeGrid(0.25, 9.75, 0.25),
                description=str(data.get("description", "")),
                quad=QuadConfig.from_dict(data["quad"]) if data.get("quad") is not None else None,
                sim=SimConfig.from_dict(data["sim"]) if data.get("sim") is not None else None,
            )
        except ConfigError:
            raise
        except KeyError as e:
            raise ConfigError(f"scenario '{name}': missing field {e}") from e
        except (TypeError, ValueError, WedgeIntensityError) as e:
            raise ConfigError(f"scenario '{name}': {e}") from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load a scenario from a JSON file.

    Raises:
        ConfigError: unreadable file, malformed JSON or invalid scenario.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read scenario file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON in {path}: {e}") from e
    scenario = Scenario.from_dict(data)
    logger.info("loaded scenario '%s' from %s", scenario.name, path)
    return scenario


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> None:
    """Write a scenario as indented JSON."""
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n", encoding="utf-8")


# Figure scenarios. Firms are observed at 0 and again after ten years.
_FIG1_MODEL = ModelParams(mu=(2.0, 3.0), sigma1=4.0, sigma2=5.0, rho=-0.5, x0=(9.0, 10.0))
_FIG3_MODEL = ModelParams(mu=(0.1, -0.2), sigma1=1.2, sigma2=0.5, rho=0.0, x0=(1.0, 1.0))
_FIG3_SIM = SimConfig(n_paths=200_000, dt=1e-2, horizon=10.0, seed=20_240_601)


def _figure_scenario(
    name: str,
    model: ModelParams,
    tau1: Optional[float],
    grid: TimeGrid,
    description: str,
    sim: Optional[SimConfig] = None,
) -> Scenario:
    return Scenario(
        name=name,
        model=model,
        obs_times=(0.0, 10.0),
        default_events=() if tau1 is None else (DefaultEvent(firm=1, time=tau1),),
        grid=grid,
        description=description,
        sim=sim,
    )


_COARSE = TimeGrid(0.25, 9.75, 0.25)
_FINE = TimeGrid(0.1, 9.9, 0.1)

BUILTIN_SCENARIOS: Dict[str, Scenario] = {
    **{
        f"fig1-rho{rho:g}": _figure_scenario(
            f"fig1-rho{rho:g}",
            _FIG1_MODEL.with_rho(rho),
            2.0,
            _COARSE,
            f"lambda2 with firm 1 defaulting at 2, rho={rho:g}",
        )
        for rho in (0.0, -0.5, -0.7)
    },
    **{
        f"fig2-tau{tau:g}": _figure_scenario(
            f"fig2-tau{tau:g}",
            _FIG1_MODEL,
            tau,
            _COARSE,
            f"lambda2 with firm 1 defaulting at {tau:g}, rho=-0.5",
        )
        for tau in (1.0, 2.0, 4.0, 6.0)
    },
    "fig3": _figure_scenario(
        "fig3",
        _FIG3_MODEL,
        None,
        _FINE,
        "independent firms: exact lambda2 against simulated local default rates",
        sim=_FIG3_SIM,
    ),
    **{
        f"fig4-rho{rho:g}": _figure_scenario(
            f"fig4-rho{rho:g}",
            _FIG3_MODEL.with_rho(rho),
            2.0,
            _FINE,
            f"lambda2 jump at the default of firm 1, rho={rho:g}",
        )
        for rho in (0.1, -0.1)
    },
}

FIGURES: Dict[str, List[str]] = {
    "fig1": ["fig1-rho0", "fig1-rho-0.5", "fig1-rho-0.7"],
    "fig2": ["fig2-tau1", "fig2-tau2", "fig2-tau4", "fig2-tau6"],
    "fig3": ["fig3"],
    "fig4": ["fig4-rho0.1", "fig4-rho-0.1"],
}


def get_scenario(name: str) -> Scenario:
    """Look up a built-in scenario by name."""
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"Unknown scenario: {name}. Available: {', '.join(sorted(BUILTIN_SCENARIOS))}")
    return BUILTIN_SCENARIOS[name]


def list_scenarios() -> List[str]:
    return sorted(BUILTIN_SCENARIOS)
