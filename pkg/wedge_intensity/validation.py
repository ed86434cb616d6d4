"""
Validation - Analytic quantities checked against the Monte Carlo oracle.

Each row compares one analytic value with a simulated estimate and its standard
error. Rows whose estimate is too noisy to decide anything are reported as
insufficient and left out of the verdict; a run passes when the number of |z| >= 3
rows stays within 5% of the decisive ones.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .densities import exit_onset, exit_probability, g_tail, survival_prob
from .errors import InsufficientSampleError
from .geometry import ModelParams, WedgeState, build_model
from .intensity import InformationState, conditional_default_density
from .montecarlo import Conditioning, SimConfig, SimEstimates, conditional_rate, simulate
from .quadrature import DEFAULT_QUAD, QuadConfig, integrate_1d

logger = logging.getLogger(__name__)

Z_LIMIT = 3.0
FALSE_ALARM_RATE = 0.05
MAX_RELATIVE_STDERR = 0.05
MIN_BIN_COUNT = 100

PASS = "pass"
FAIL = "FAIL"
INSUFFICIENT = "insufficient"

# driftless battery: independent firms and the k = 3 special case
DEFAULT_BATTERY: Dict[str, ModelParams] = {
    "rho0": ModelParams(mu=(0.0, 0.0), sigma1=1.0, sigma2=1.0, rho=0.0, x0=(1.0, 1.0)),
    "rho-0.5": ModelParams(mu=(0.0, 0.0), sigma1=1.0, sigma2=1.0, rho=-0.5, x0=(1.0, 1.0)),
}


@dataclass
class ValidationRow:
    """One analytic-versus-simulated comparison."""
    quantity: str
    analytic: float
    mc: Optional[float]
    std_err: Optional[float]
    z: Optional[float] = None
    status: str = INSUFFICIENT

    @classmethod
    def compare(cls, quantity: str, analytic: float, mc: float, std_err: float) -> "ValidationRow":
        if std_err <= 0.0 or mc <= 0.0 or std_err > MAX_RELATIVE_STDERR * mc:
            return cls(quantity, analytic, mc, std_err, None, INSUFFICIENT)
        z = (analytic - mc) / std_err
        return cls(quantity, analytic, mc, std_err, z, PASS if abs(z) < Z_LIMIT else FAIL)

    @property
    def decisive(self) -> bool:
        return self.status != INSUFFICIENT

    def to_dict(self) -> Dict[str, Any]:
        return {
            "quantity": self.quantity,
            "analytic": self.analytic,
            "mc": self.mc,
            "std_err": self.std_err,
            "z": self.z,
            "status": self.status,
        }


@dataclass
class ValidationReport:
    """Rows of one validation run and the overall verdict."""
    rows: List[ValidationRow] = field(default_factory=list)

    @property
    def decisive_rows(self) -> List[ValidationRow]:
        return [row for row in self.rows if row.decisive]

    @property
    def failures(self) -> List[ValidationRow]:
        return [row for row in self.rows if row.status == FAIL]

    @property
    def false_alarm_budget(self) -> int:
        return int(math.floor(FALSE_ALARM_RATE * len(self.decisive_rows)))

    @property
    def passed(self) -> bool:
        return len(self.failures) <= self.false_alarm_budget

    def extend(self, other: "ValidationReport") -> None:
        self.rows.extend(other.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "decisive": len(self.decisive_rows),
            "failures": len(self.failures),
            "false_alarm_budget": self.false_alarm_budget,
            "rows": [row.to_dict() for row in self.rows],
        }


def _survival_rows(label: str, state: WedgeState, est: SimEstimates, times: Sequence[float], q: QuadConfig, scale: float) -> List[ValidationRow]:
    rows = []
    for t in times:
        analytic = float(survival_prob(t, state, q).value) * scale
        mc, se = est.survival(t)
        rows.append(ValidationRow.compare(f"{label}:survival(t={t:g})", analytic, mc, se))
    return rows


def _exit_rows(label: str, state: WedgeState, est: SimEstimates, t: float, q: QuadConfig, scale: float) -> List[ValidationRow]:
    rows = []
    for firm, frame in ((1, state), (2, state.tilde())):
        analytic = float(exit_probability(t, frame, q).value) * scale
        mc, se = est.exit_mass(t, firm)
        rows.append(ValidationRow.compare(f"{label}:exit_mass{firm}(t={t:g})", analytic, mc, se))
    return rows


def joint_bin_mass(state: WedgeState, s_lo: float, s_hi: float, t_lo: float, t_hi: float, q: QuadConfig = DEFAULT_QUAD) -> float:
    """
    P(tau1 in (s_lo, s_hi], tau2 in (t_lo, t_hi]) for s_hi <= t_lo, as the integral
    over s of g_tail(s, t_lo) - g_tail(s, t_hi).
    """
    def integrand(times: np.ndarray) -> np.ndarray:
        return np.array(
            [float(g_tail(s, t_lo, state, q).value) - float(g_tail(s, t_hi, state, q).value) for s in times]
        )

    lower = max(s_lo, exit_onset(state, q), 1e-12)
    if lower >= s_hi:
        return 0.0
    return integrate_1d(integrand, lower, s_hi, q.outer(), label="joint_bin_mass").value


def _joint_rows(label: str, state: WedgeState, est: SimEstimates, q: QuadConfig, scale: float, max_bins: int) -> List[ValidationRow]:
    edges = est.bin_edges
    counts = est.default_time_hist2d
    candidates = [
        (int(counts[i, j]), i, j)
        for i in range(counts.shape[0])
        for j in range(i + 1, counts.shape[1])
        if counts[i, j] >= MIN_BIN_COUNT
    ]
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    rows = []
    for _, i, j in candidates[:max_bins]:
        s_lo, s_hi, t_lo, t_hi = edges[i], edges[i + 1], edges[j], edges[j + 1]
        analytic = joint_bin_mass(state, s_lo, s_hi, t_lo, t_hi, q) * scale
        mc, se = est.joint_bin(s_lo, s_hi, t_lo, t_hi)
        name = f"{label}:joint(({s_lo:g},{s_hi:g}]x({t_lo:g},{t_hi:g}])"
        rows.append(ValidationRow.compare(name, analytic, mc, se))
    return rows


def _rate_row(label: str, model: ModelParams, cfg: SimConfig, est: SimEstimates, u: float, delta: float, q: QuadConfig, scale: float) -> ValidationRow:
    name = f"{label}:rate2(u={u:g},delta={delta:g})"
    info = InformationState(obs_times=(0.0,), last_obs_index=0, x_obs=model.x0, as_of=u)

    def integrand(times: np.ndarray) -> np.ndarray:
        return np.array([float(conditional_default_density(float(v), info, model, q).value) for v in times])

    analytic = integrate_1d(integrand, u, u + delta, q.outer(), label="rate").value / delta * scale
    try:
        mc, se = conditional_rate(model, cfg, u, delta, Conditioning(), firm=2, estimates=est)
    except InsufficientSampleError as e:
        logger.warning("%s: %s", name, e)
        return ValidationRow(name, analytic, None, None)
    return ValidationRow.compare(name, analytic, mc, se)


def run_validation(
    model: ModelParams,
    cfg: SimConfig,
    q: QuadConfig = DEFAULT_QUAD,
    label: str = "model",
    perturb: float = 1.0,
    rate_time: float = 1.0,
    delta: float = 0.05,
    max_bins: int = 6,
    workers: Optional[int] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> ValidationReport:
    """
    Compare analytic survival, exit masses, joint bin masses and the local default
    rate of firm 2 with one simulation of the model.

    Args:
        model: Model parameters.
        cfg: Monte Carlo settings.
        q: Numerical configuration.
        label: Prefix of the row names.
        perturb: Factor applied to every analytic value (harness self-test).
        rate_time: Time u of the local-rate comparison (skipped beyond the horizon).
        delta: Window of the local rate.
        max_bins: Joint bins compared, the most populated first.
        workers: Monte Carlo thread count.
        progress: Called with a short message after each group of rows.

    Returns:
        ValidationReport.
    """
    state = build_model(model)
    est = simulate(model, cfg, workers)
    notify = progress or (lambda message: None)
    report = ValidationReport()

    groups: List[Callable[[], List[ValidationRow]]] = [
        lambda: _survival_rows(label, state, est, cfg.times(), q, perturb),
        lambda: _exit_rows(label, state, est, cfg.horizon, q, perturb),
        lambda: _joint_rows(label, state, est, q, perturb, max_bins),
    ]
    if rate_time + delta <= cfg.horizon:
        groups.append(lambda: [_rate_row(label, model, cfg, est, rate_time, delta, q, perturb)])

    for group in groups:
        report.rows.extend(group())
        notify(f"{label}: {len(report.rows)} rows")

    for row in report.failures:
        logger.warning("%s: analytic %.6g vs mc %.6g (z=%.2f)", row.quantity, row.analytic, row.mc or 0.0, row.z or 0.0)
    return report
