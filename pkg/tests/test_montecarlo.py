"""
Tests for the montecarlo module - the simulation oracle.
"""

import math

import numpy as np
import pytest

from wedge_intensity.densities import pi_survival
from wedge_intensity.errors import DomainError, InsufficientSampleError
from wedge_intensity.geometry import ModelParams
from wedge_intensity.montecarlo import (
    BLOCK_PATHS,
    Conditioning,
    SimConfig,
    SimEstimates,
    conditional_rate,
    simulate,
)
from wedge_intensity.regime import RegimeTag

UNIT = ModelParams(mu=(0.0, 0.0), sigma1=1.0, sigma2=1.0, rho=0.0, x0=(1.0, 1.0))
SMALL = SimConfig(n_paths=2 * BLOCK_PATHS + 100, dt=1e-2, horizon=1.0, seed=7)


@pytest.fixture(scope="module")
def unit_estimates():
    """A moderately sized simulation of two independent unit firms."""
    cfg = SimConfig(n_paths=40_000, dt=1e-3, horizon=1.1, seed=11, report_times=(0.5, 1.0))
    return simulate(UNIT, cfg, workers=2)


def estimates_from(tau1, tau2, horizon=2.0) -> SimEstimates:
    tau1 = np.asarray(tau1, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    edges = np.linspace(0.0, horizon, 3)
    return SimEstimates(
        n_paths=tau1.size,
        horizon=horizon,
        tau1=tau1,
        tau2=tau2,
        survival_curve=[],
        default_time_hist2d=np.zeros((2, 2), dtype=np.int64),
        bin_edges=edges,
        escape_counts=tau1.size,
    )


class TestSimConfig:
    """Tests for SimConfig."""

    def test_defaults(self):
        """Test default settings."""
        cfg = SimConfig()
        assert cfg.n_paths == 100_000
        assert cfg.bridge_correction
        assert cfg.n_steps == 4000
        assert cfg.times() == (0.5, 1.0, 1.5, 2.0)

    def test_report_times(self):
        """Test explicit report times."""
        assert SimConfig(report_times=[0.3, 1.0]).times() == (0.3, 1.0)

    def test_round_trip(self):
        """Test to_dict / from_dict."""
        cfg = SimConfig(n_paths=5000, seed=3, report_times=(0.5,))
        assert SimConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        """Test that unknown keys are rejected."""
        with pytest.raises(DomainError):
            SimConfig.from_dict({"paths": 10})

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_paths": 0},
            {"dt": 0.0},
            {"dt": 3.0},
            {"seed": -1},
            {"hist_bins": 0},
            {"report_times": (2.5,)},
        ],
    )
    def test_invalid(self, kwargs):
        """Test validation."""
        with pytest.raises(DomainError):
            SimConfig(**kwargs)


class TestSimulate:
    """Tests for simulate."""

    def test_deterministic(self):
        """Test that a fixed seed reproduces the draws bit for bit."""
        first = simulate(UNIT, SMALL, workers=1)
        second = simulate(UNIT, SMALL, workers=1)
        np.testing.assert_array_equal(first.tau1, second.tau1)
        np.testing.assert_array_equal(first.tau2, second.tau2)

    def test_independent_of_workers(self):
        """Test that the thread count does not change the estimates."""
        serial = simulate(UNIT, SMALL, workers=1)
        threaded = simulate(UNIT, SMALL, workers=3)
        np.testing.assert_array_equal(serial.tau1, threaded.tau1)
        np.testing.assert_array_equal(serial.default_time_hist2d, threaded.default_time_hist2d)
        assert serial.survival_curve == threaded.survival_curve

    def test_seed_matters(self):
        """Test that another seed gives other paths."""
        other = SimConfig(n_paths=SMALL.n_paths, dt=SMALL.dt, horizon=SMALL.horizon, seed=8)
        assert not np.array_equal(simulate(UNIT, SMALL, workers=1).tau1, simulate(UNIT, other, workers=1).tau1)

    def test_bridge_correction_reduces_bias(self):
        """Test that the bridge correction removes most of the discrete-monitoring bias."""
        exact = pi_survival(1.0, 1.0, 0.0) ** 2
        base = {"n_paths": 40_000, "dt": 1e-2, "horizon": 1.0, "seed": 13, "report_times": (1.0,)}
        corrected, se = simulate(UNIT, SimConfig(**base), workers=1).survival(1.0)
        plain, _ = simulate(UNIT, SimConfig(bridge_correction=False, **base), workers=1).survival(1.0)
        assert plain - exact > 5.0 * se
        assert abs(corrected - exact) < abs(plain - exact)

    def test_standard_error_scaling(self):
        """Test that four times the paths halve the standard error."""
        base = {"dt": 1e-2, "horizon": 1.0, "seed": 17, "report_times": (1.0,)}
        _, se_small = simulate(UNIT, SimConfig(n_paths=10_000, **base), workers=1).survival(1.0)
        _, se_large = simulate(UNIT, SimConfig(n_paths=40_000, **base), workers=1).survival(1.0)
        assert se_large / se_small == pytest.approx(0.5, rel=0.2)

    def test_histogram_accounts_for_every_path(self):
        """Test histogram mass plus escapes equals the path count."""
        est = simulate(UNIT, SMALL, workers=1)
        assert est.default_time_hist2d.shape == (SMALL.hist_bins, SMALL.hist_bins)
        assert int(est.default_time_hist2d.sum()) + est.escape_counts == SMALL.n_paths
        both = np.isfinite(est.tau1) & np.isfinite(est.tau2)
        assert int(est.default_time_hist2d.sum()) == int(np.count_nonzero(both))

    def test_default_times_on_grid(self):
        """Test that defaults are dated at step ends within the horizon."""
        est = simulate(UNIT, SMALL, workers=1)
        finite = est.tau1[np.isfinite(est.tau1)]
        assert finite.size > 0
        assert np.all(finite <= SMALL.horizon + 1e-12)
        np.testing.assert_allclose(finite / SMALL.dt, np.round(finite / SMALL.dt), atol=1e-6)

    def test_survival_independent(self, unit_estimates):
        """Test survival at t = 1 against (2 Phi(1) - 1)^2."""
        t, p, se = unit_estimates.survival_curve[1]
        assert t == 1.0
        assert abs(p - 0.466065) < 4.0 * se
        assert unit_estimates.survival(1.0) == (p, se)

    def test_exit_masses(self, unit_estimates):
        """Test that the two first-default masses and survival add up."""
        first, _ = unit_estimates.exit_mass(1.0, 1)
        second, _ = unit_estimates.exit_mass(1.0, 2)
        survival, _ = unit_estimates.survival(1.0)
        assert first + second + survival == pytest.approx(1.0, abs=0.02)
        assert abs(first - second) < 0.02


class TestConditionalRate:
    """Tests for conditional_rate."""

    def test_independent_rate(self, unit_estimates):
        """Test the rate after both survive to u = 1 against the single-name window rate."""
        rate, se = conditional_rate(UNIT, SMALL, 1.0, 0.05, estimates=unit_estimates)
        survival = pi_survival(1.0, 1.0, 0.0)
        expected = (survival - pi_survival(1.0, 1.05, 0.0)) / survival / 0.05
        assert se > 0.0
        assert abs(rate - expected) < 4.0 * se

    def test_insufficient(self):
        """Test a conditioning set below 1000 paths."""
        est = simulate(UNIT, SimConfig(n_paths=500, dt=1e-2, horizon=1.0), workers=1)
        with pytest.raises(InsufficientSampleError) as excinfo:
            conditional_rate(UNIT, SMALL, 0.5, 0.1, estimates=est)
        assert excinfo.value.size < 1000

    def test_beyond_horizon(self, unit_estimates):
        """Test u + delta past the horizon."""
        with pytest.raises(DomainError):
            conditional_rate(UNIT, SMALL, 1.08, 0.05, estimates=unit_estimates)

    def test_bad_arguments(self, unit_estimates):
        """Test delta and firm validation."""
        with pytest.raises(DomainError):
            conditional_rate(UNIT, SMALL, 0.5, 0.0, estimates=unit_estimates)
        with pytest.raises(DomainError):
            conditional_rate(UNIT, SMALL, 0.5, 0.05, firm=3, estimates=unit_estimates)


class TestEstimates:
    """Tests for the estimators on hand-made default times."""

    def test_survival(self):
        """Test the first-default survival proportion."""
        est = estimates_from([0.5, math.inf, 1.5, math.inf], [math.inf, 0.7, math.inf, math.inf])
        p, se = est.survival(1.0)
        assert p == 0.5
        assert se == pytest.approx(math.sqrt(0.25 / 4))

    def test_exit_mass(self):
        """Test that only the firm defaulting first counts."""
        est = estimates_from([0.5, 0.9, 1.5, math.inf], [0.8, 0.7, math.inf, math.inf])
        assert est.exit_mass(1.0, 1)[0] == 0.25
        assert est.exit_mass(1.0, 2)[0] == 0.25

    def test_joint_bin(self):
        """Test a half-open bin."""
        est = estimates_from([0.5, 0.5, 1.0], [1.0, 1.5, 1.5])
        assert est.joint_bin(0.0, 1.0, 1.0, 2.0)[0] == pytest.approx(2.0 / 3.0)
        assert est.joint_bin(0.5, 1.0, 1.0, 2.0)[0] == pytest.approx(1.0 / 3.0)


class TestConditioning:
    """Tests for Conditioning masks."""

    own = np.array([2.0, 2.0, 0.5, 2.0])
    other = np.array([math.inf, 0.8, math.inf, 0.2])

    def test_both_alive(self):
        """Test survival of both firms."""
        np.testing.assert_array_equal(Conditioning().mask(self.own, self.other, 1.0), [True, False, False, False])

    def test_in_window(self):
        """Test the other firm's default in a bin."""
        mask = Conditioning.in_window(0.5, 1.0).mask(self.own, self.other, 1.0)
        np.testing.assert_array_equal(mask, [False, True, False, False])

    def test_before_window(self):
        """Test the other firm's default before the window."""
        conditioning = Conditioning(RegimeTag.CO_DEFAULT_BEFORE_WINDOW, window_start=0.5)
        np.testing.assert_array_equal(conditioning.mask(self.own, self.other, 1.0), [False, False, False, True])

    def test_missing_bin(self):
        """Test CoDefaultInWindow without a bin."""
        with pytest.raises(DomainError):
            Conditioning(RegimeTag.CO_DEFAULT_IN_WINDOW).mask(self.own, self.other, 1.0)

    def test_target_defaulted(self):
        """Test that a defaulted target cannot be conditioned on."""
        with pytest.raises(DomainError):
            Conditioning(RegimeTag.TARGET_DEFAULTED).mask(self.own, self.other, 1.0)
