"""
Monte Carlo - Simulation oracle for the two-firm first-passage problem.

Paths of Z = Sigma^-1 X are advanced with exact Gaussian increments. Each firm's
default is the first step at which Z crosses its edge of the wedge, either at a
step end or, with the bridge correction, inside the step with the Brownian-bridge
crossing probability exp(-2 d_start d_end / dt) of that edge. A default is dated at
the end of the step in which it is detected.

Paths are split into fixed blocks of 8192. Block b draws from
Philox(SeedSequence(seed, spawn_key=(b,))), so the estimates depend on the seed only,
never on the worker count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .config import worker_count
from .errors import DomainError, InsufficientSampleError
from .geometry import ModelParams, build_model
from .regime import RegimeTag

logger = logging.getLogger(__name__)

BLOCK_PATHS = 8192
MIN_CONDITIONED = 1000


@dataclass(frozen=True)
class SimConfig:
    """
    Monte Carlo settings.

    Attributes:
        n_paths: Number of simulated paths.
        dt: Time step in years.
        horizon: Simulation horizon in years.
        seed: Root seed (0 <= seed < 2^64).
        bridge_correction: Detect crossings inside a step.
        hist_bins: Bins per axis of the (tau1, tau2) histogram over [0, horizon].
        report_times: Times of the survival curve; default quarters of the horizon.
    """
    n_paths: int = 100_000
    dt: float = 5e-4
    horizon: float = 2.0
    seed: int = 20_240_601
    bridge_correction: bool = True
    hist_bins: int = 20
    report_times: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise DomainError(f"SimConfig.n_paths must be >= 1, got {self.n_paths}")
        if not (self.dt > 0.0 and self.horizon > 0.0 and self.dt <= self.horizon):
            raise DomainError(f"SimConfig needs 0 < dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"SimConfig.seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.hist_bins < 1:
            raise DomainError(f"SimConfig.hist_bins must be >= 1, got {self.hist_bins}")
        if self.report_times is not None:
            object.__setattr__(self, "report_times", tuple(float(t) for t in self.report_times))
            if any(not 0.0 < t <= self.horizon for t in self.report_times):
                raise DomainError(f"report_times must lie in (0, horizon], got {self.report_times}")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.horizon / self.dt - 1e-9)))

    def times(self) -> Tuple[float, ...]:
        if self.report_times is not None:
            return self.report_times
        return tuple(self.horizon * f for f in (0.25, 0.5, 0.75, 1.0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_paths": self.n_paths,
            "dt": self.dt,
            "horizon": self.horizon,
            "seed": self.seed,
            "bridge_correction": self.bridge_correction,
            "hist_bins": self.hist_bins,
            "report_times": None if self.report_times is None else list(self.report_times),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SimConfig":
        known = {name: data[name] for name in cls.__dataclass_fields__ if name in data}
        unknown = set(data) - set(known)
        if unknown:
            raise DomainError(f"Unknown SimConfig fields: {sorted(unknown)}")
        if known.get("report_times") is not None:
            known["report_times"] = tuple(known["report_times"])
        return cls(**known)


@dataclass(eq=False)
class SimEstimates:
    """
    Simulated default times and the estimates derived from them.

    Attributes:
        n_paths: Number of paths.
        horizon: Simulation horizon.
        tau1: Default time of firm 1 per path (inf if none by the horizon).
        tau2: Default time of firm 2 per path (inf if none by the horizon).
        survival_curve: (t, P(tau > t), std error) at the report times.
        default_time_hist2d: Counts of (tau1, tau2) for paths where both default.
        bin_edges: Edges of both histogram axes.
        escape_counts: Paths not in the histogram.
    """
    n_paths: int
    horizon: float
    tau1: np.ndarray = field(repr=False)
    tau2: np.ndarray = field(repr=False)
    survival_curve: List[Tuple[float, float, float]]
    default_time_hist2d: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    escape_counts: int

    def _proportion(self, mask: np.ndarray) -> Tuple[float, float]:
        p = float(np.count_nonzero(mask)) / self.n_paths
        return p, math.sqrt(p * (1.0 - p) / self.n_paths)

    def survival(self, t: float) -> Tuple[float, float]:
        """P(min(tau1, tau2) > t) and its standard error."""
        return self._proportion(np.minimum(self.tau1, self.tau2) > t)

    def exit_mass(self, t: float, firm: int) -> Tuple[float, float]:
        """P(tau_firm <= min(t, tau_other)): the firm defaults first, by t."""
        own, other = (self.tau1, self.tau2) if firm == 1 else (self.tau2, self.tau1)
        return self._proportion((own <= t) & (own <= other))

    def joint_bin(self, s_lo: float, s_hi: float, t_lo: float, t_hi: float) -> Tuple[float, float]:
        """P(tau1 in (s_lo, s_hi], tau2 in (t_lo, t_hi])."""
        mask = (self.tau1 > s_lo) & (self.tau1 <= s_hi) & (self.tau2 > t_lo) & (self.tau2 <= t_hi)
        return self._proportion(mask)


@dataclass(frozen=True)
class Conditioning:
    """
    Default history selecting the paths for a conditional rate.

    Attributes:
        tag: BothAlive, CoDefaultInWindow or CoDefaultBeforeWindow.
        s_lo: Lower end of the other firm's default-time bin (CoDefaultInWindow).
        s_hi: Upper end of that bin.
        window_start: Observation time t_j (CoDefaultBeforeWindow: other default before it).
    """
    tag: RegimeTag = RegimeTag.BOTH_ALIVE
    s_lo: Optional[float] = None
    s_hi: Optional[float] = None
    window_start: float = 0.0

    @classmethod
    def in_window(cls, s_lo: float, s_hi: float) -> "Conditioning":
        return cls(RegimeTag.CO_DEFAULT_IN_WINDOW, s_lo, s_hi)

    def mask(self, own: np.ndarray, other: np.ndarray, u: float) -> np.ndarray:
        alive = own > u
        if self.tag is RegimeTag.BOTH_ALIVE:
            return alive & (other > u)
        if self.tag is RegimeTag.CO_DEFAULT_IN_WINDOW:
            if self.s_lo is None or self.s_hi is None:
                raise DomainError("CoDefaultInWindow conditioning needs a default-time bin")
            return alive & (other > self.s_lo) & (other <= min(self.s_hi, u))
        if self.tag is RegimeTag.CO_DEFAULT_BEFORE_WINDOW:
            return alive & (other < self.window_start)
        raise DomainError(f"cannot condition on {self.tag.value}")


def _simulate_block(
    z0: np.ndarray,
    m: np.ndarray,
    normal: np.ndarray,
    cfg: SimConfig,
    size: int,
    block: int,
) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(block,))))
    dt = cfg.dt
    root = math.sqrt(dt)
    z = np.tile(z0, (size, 1))
    tau1 = np.full(size, np.inf)
    tau2 = np.full(size, np.inf)
    d1 = z @ normal
    d2 = z[:, 1].copy()

    for step in range(cfg.n_steps):
        z += rng.standard_normal((size, 2)) * root + m * dt
        end1 = z @ normal
        end2 = z[:, 1]
        cross1 = end1 <= 0.0
        cross2 = end2 <= 0.0
        if cfg.bridge_correction:
            draws = rng.random((size, 2))
            # crossing probability of a Brownian bridge between two positive distances
            cross1 |= draws[:, 0] < np.exp(-2.0 * np.maximum(d1, 0.0) * np.maximum(end1, 0.0) / dt)
            cross2 |= draws[:, 1] < np.exp(-2.0 * np.maximum(d2, 0.0) * np.maximum(end2, 0.0) / dt)
        t_end = (step + 1) * dt
        tau1[cross1 & np.isinf(tau1)] = t_end
        tau2[cross2 & np.isinf(tau2)] = t_end
        d1 = end1
        d2 = end2.copy()
        if np.all(np.isfinite(tau1) & np.isfinite(tau2)):
            break
    return tau1, tau2


def simulate(model: ModelParams, cfg: SimConfig, workers: Optional[int] = None) -> SimEstimates:
    """
    Simulate default times of both firms up to the horizon.

    Args:
        model: Model parameters.
        cfg: Simulation settings.
        workers: Thread count; None reads WEDGE_INTENSITY_THREADS.

    Returns:
        SimEstimates, bit-identical for a fixed seed.
    """
    state = build_model(model)
    z0 = np.asarray(state.z)
    m = np.asarray(state.m)
    normal = np.asarray(state.edge_normal)
    sizes = [min(BLOCK_PATHS, cfg.n_paths - start) for start in range(0, cfg.n_paths, BLOCK_PATHS)]
    n_workers = min(worker_count(workers), len(sizes))
    logger.info("simulating %d paths in %d blocks on %d threads", cfg.n_paths, len(sizes), n_workers)

    def run(block: int) -> Tuple[np.ndarray, np.ndarray]:
        result = _simulate_block(z0, m, normal, cfg, sizes[block], block)
        logger.debug("block %d done", block)
        return result

    if n_workers <= 1:
        blocks = [run(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as executor:
            blocks = list(executor.map(run, range(len(sizes))))

    tau1 = np.concatenate([b[0] for b in blocks])
    tau2 = np.concatenate([b[1] for b in blocks])
    first = np.minimum(tau1, tau2)
    curve = []
    for t in cfg.times():
        p = float(np.count_nonzero(first > t)) / cfg.n_paths
        curve.append((t, p, math.sqrt(p * (1.0 - p) / cfg.n_paths)))

    edges = np.linspace(0.0, cfg.horizon, cfg.hist_bins + 1)
    both = np.isfinite(tau1) & np.isfinite(tau2)
    hist, _, _ = np.histogram2d(tau1[both], tau2[both], bins=(edges, edges))
    counts = hist.astype(np.int64)
    return SimEstimates(
        n_paths=cfg.n_paths,
        horizon=cfg.horizon,
        tau1=tau1,
        tau2=tau2,
        survival_curve=curve,
        default_time_hist2d=counts,
        bin_edges=edges,
        escape_counts=int(cfg.n_paths - counts.sum()),
    )


def conditional_rate(
    model: ModelParams,
    cfg: SimConfig,
    u: float,
    delta: float,
    conditioning: Conditioning = Conditioning(),
    firm: int = 2,
    estimates: Optional[SimEstimates] = None,
) -> Tuple[float, float]:
    """
    Empirical local default rate P(tau in (u, u + delta] | history) / delta.

    Args:
        model: Model parameters.
        cfg: Simulation settings (ignored when estimates are supplied).
        u: Conditioning time.
        delta: Window length.
        conditioning: Default history of the other firm.
        firm: Target firm.
        estimates: Reuse an existing simulation.

    Returns:
        (rate, std error) per year.

    Raises:
        InsufficientSampleError: fewer than 1000 paths match the conditioning.
    """
    if firm not in (1, 2):
        raise DomainError(f"firm must be 1 or 2, got {firm}")
    if not delta > 0.0:
        raise DomainError(f"conditional_rate: delta must be positive, got {delta}")
    est = estimates if estimates is not None else simulate(model, cfg)
    if u + delta > est.horizon:
        raise DomainError(f"conditional_rate: u + delta = {u + delta} exceeds the horizon {est.horizon}")
    own, other = (est.tau2, est.tau1) if firm == 2 else (est.tau1, est.tau2)
    mask = conditioning.mask(own, other, u)
    size = int(np.count_nonzero(mask))
    if size < MIN_CONDITIONED:
        raise InsufficientSampleError(size, MIN_CONDITIONED)
    hits = int(np.count_nonzero(mask & (own <= u + delta)))
    p = hits / size
    return p / delta, math.sqrt(p * (1.0 - p) / size) / delta
