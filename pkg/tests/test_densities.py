"""
Tests for the densities module.

With rho = 0 the two coordinates are independent Brownian motions and every wedge
density factorises into single-name closed forms; most oracles below use that.
"""

import math

import numpy as np
import pytest
from scipy.stats import norm

from wedge_intensity import densities
from wedge_intensity.densities import (
    NEGATIVE_NOISE,
    DensityValue,
    EvalQuality,
    b_reflect,
    b_series,
    exit_onset,
    exit_probability,
    exit_time_density,
    f_exit,
    g_integral,
    g_joint,
    g_tail,
    h_reflect,
    h_survive,
    hit_probability,
    l_kernel,
    p_kernel,
    pi_hit,
    pi_hit_argmax_level,
    pi_hit_argmax_time,
    pi_survival,
    pi_tilde,
    singular_exponent,
    surviving_position_reflect,
    survival_prob,
)
from wedge_intensity.errors import DomainError
from wedge_intensity.geometry import ModelParams, WedgeState, build_model, tilde_model
from wedge_intensity.quadrature import QuadConfig, integrate_1d
from wedge_intensity.scenario import get_scenario

SERIES = QuadConfig(prefer_closed_forms=False)


def unit_state(rho: float = 0.0, x0=(1.0, 1.0), mu=(0.0, 0.0)) -> WedgeState:
    return build_model(ModelParams(mu=mu, sigma1=1.0, sigma2=1.0, rho=rho, x0=x0))


class TestSingleName:
    """Tests for the single-name closed forms."""

    def test_pi_hit_values(self):
        """Test tabulated first-passage densities."""
        assert pi_hit(1.0, 1.0, 0.0) == pytest.approx(0.241971, abs=1e-6)
        assert pi_hit(1.0, 0.5, 0.0) == pytest.approx(0.415107, abs=1e-6)

    def test_pi_survival_value(self):
        """Test 2 Phi(1) - 1."""
        assert pi_survival(1.0, 1.0, 0.0) == pytest.approx(0.682689, abs=1e-6)

    def test_pi_tilde_value(self):
        """Test the killed Gaussian at its starting level."""
        assert pi_tilde(1.0, 1.0, 1.0, 0.0) == pytest.approx(0.344951, abs=1e-6)

    def test_pi_tilde_outside(self):
        """Test that levels at or below 0 carry no mass."""
        np.testing.assert_array_equal(pi_tilde(np.array([-1.0, 0.0]), 1.0, 1.0, 0.0), [0.0, 0.0])

    def test_survival_is_hit_complement(self):
        """Test d/du pi_survival = -pi_hit with drift."""
        x, u, m2, du = 1.3, 0.8, -0.4, 1e-5
        derivative = (pi_survival(x, u + du, m2) - pi_survival(x, u - du, m2)) / (2.0 * du)
        assert -derivative == pytest.approx(pi_hit(x, u, m2), rel=1e-6)

    def test_survival_is_tilde_mass(self):
        """Test that pi_tilde integrates to pi_survival."""
        mass = integrate_1d(lambda x: pi_tilde(x, 0.7, 1.2, 0.3), 0.0, 30.0)
        assert mass.value == pytest.approx(pi_survival(0.7, 1.2, 0.3), rel=1e-8)

    def test_hit_probability(self):
        """Test the total hitting mass against quadrature."""
        total = integrate_1d(lambda h: pi_hit(1.0, h, 0.5), 0.0, math.inf)
        assert total.value == pytest.approx(hit_probability(1.0, 0.5), rel=1e-7)
        assert hit_probability(1.0, 0.5) == pytest.approx(math.exp(-1.0))
        assert hit_probability(1.0, -0.5) == 1.0

    def test_argmax_driftless(self):
        """Test the driftless maximisers."""
        assert pi_hit_argmax_time(1.0, 0.0) == pytest.approx(1.0 / 3.0)
        assert pi_hit_argmax_level(1.0, 0.0) == pytest.approx(1.0)

    @pytest.mark.parametrize("m2", [-0.8, 0.4])
    def test_argmax_with_drift(self, m2):
        """Test that the maximisers beat nearby points."""
        h_star = pi_hit_argmax_time(1.5, m2)
        peak = pi_hit(1.5, h_star, m2)
        assert peak > pi_hit(1.5, h_star * 1.01, m2)
        assert peak > pi_hit(1.5, h_star * 0.99, m2)
        x_star = pi_hit_argmax_level(0.7, m2)
        peak = pi_hit(x_star, 0.7, m2)
        assert peak > pi_hit(x_star * 1.01, 0.7, m2)
        assert peak > pi_hit(x_star * 0.99, 0.7, m2)

    def test_domain(self):
        """Test nonpositive arguments."""
        with pytest.raises(DomainError):
            pi_hit(0.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            pi_survival(1.0, -1.0, 0.0)


class TestEvalQuality:
    """Tests for EvalQuality."""

    def test_merge(self):
        """Test combining diagnostics."""
        merged = EvalQuality(3, False, 1e-9).merge(EvalQuality(7, True, 2e-9, clamped=True))
        assert merged.series_terms_used == 7
        assert merged.truncation_flag
        assert merged.quadrature_estimate_error == pytest.approx(3e-9)
        assert merged.clamped

    def test_terms_positive(self):
        """Test that at least one term is reported."""
        with pytest.raises(DomainError):
            EvalQuality(series_terms_used=0)


class TestSeries:
    """Tests for the Bessel-series densities."""

    def test_exit_density_independent(self):
        """Test b against the product of a hitting density and a killed Gaussian."""
        s = unit_state()
        r = np.array([0.2, 0.9, 1.0, 1.7, 3.5])
        expected = (
            math.exp(-0.5) / (2.0 * math.pi)
            * (np.exp(-((r - 1.0) ** 2) / 2.0) - np.exp(-((r + 1.0) ** 2) / 2.0))
        )
        result = b_series(r, 1.0, s)
        np.testing.assert_allclose(result.value, expected, rtol=1e-9)
        assert not result.quality.truncation_flag

    def test_scalar(self):
        """Test scalar in, scalar out."""
        assert isinstance(b_series(1.0, 1.0, unit_state()).value, float)

    @pytest.mark.parametrize("rho,k", [(0.0, 2), (-0.5, 3)])
    def test_exit_matches_reflection(self, rho, k):
        """Test the series against the image sum for alpha = pi/k."""
        s = unit_state(rho=rho, x0=(0.8, 1.3))
        r = np.linspace(0.05, 3.0, 40)
        for t in (0.3, 1.0, 2.5):
            series = b_series(r, t, s).value
            closed = np.asarray(b_reflect(r, t, s, k))
            np.testing.assert_allclose(series, closed, rtol=1e-8, atol=1e-300)

    @pytest.mark.parametrize("rho,k", [(0.0, 2), (-0.5, 3)])
    def test_surviving_matches_reflection(self, rho, k):
        """Test h_survive against h_reflect with a drift."""
        s = unit_state(rho=rho, x0=(0.8, 1.3), mu=(0.3, -0.2))
        r = np.linspace(0.05, 3.5, 30)
        for theta in (0.1 * s.alpha, 0.5 * s.alpha, 0.9 * s.alpha):
            series = h_survive(r, theta, 0.7, s).value
            closed = np.asarray(h_reflect(r, theta, 0.7, s, k))
            np.testing.assert_allclose(series, closed, rtol=1e-8, atol=1e-300)

    def test_tilted_closed_form(self):
        """Test f_exit with and without the closed form under a drift."""
        s = unit_state(rho=-0.5, mu=(0.4, 0.1))
        r = np.linspace(0.1, 3.0, 12)
        series = f_exit(r, 0.9, s, SERIES)
        np.testing.assert_allclose(series.value, f_exit(r, 0.9, s).value, rtol=1e-8)
        assert series.quality.series_terms_used > 1
        assert f_exit(r, 0.9, s).quality.series_terms_used == 1

    def test_closed_forms_only_at_pi_over_k(self):
        """Test that other angles keep the series under the default configuration."""
        s = unit_state(rho=-0.3, mu=(0.4, 0.1))
        r = np.linspace(0.1, 3.0, 12)
        assert f_exit(r, 0.9, s).quality.series_terms_used > 1
        np.testing.assert_array_equal(f_exit(r, 0.9, s).value, f_exit(r, 0.9, s, SERIES).value)

    def test_negligible_nodes_are_skipped(self):
        """Test that radii far out in the Gaussian tail return zero without truncation."""
        s = unit_state(rho=-0.3)
        far = s.r + 20.0
        result = f_exit(np.array([s.r, far]), 2e-3, s, SERIES)
        assert result.value[1] == 0.0
        assert not result.quality.truncation_flag

    def test_surviving_position_independent(self):
        """Test the image sum at rho = 0 against a product of killed Gaussians."""
        s = unit_state()
        value = surviving_position_reflect(np.array([1.0, 1.0]), 1.0, s, 2)
        assert value == pytest.approx(0.118991, abs=1e-6)

    def test_edges_absorb(self):
        """Test that h_survive vanishes on both edges."""
        s = unit_state(rho=-0.3)
        r = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(h_survive(r, 0.0, 1.0, s).value, 0.0, atol=1e-14)
        np.testing.assert_allclose(h_survive(r, s.alpha, 1.0, s).value, 0.0, atol=1e-14)

    def test_theta_outside(self):
        """Test theta outside the wedge."""
        with pytest.raises(DomainError):
            h_survive(1.0, 3.0, 1.0, unit_state())

    def test_wrong_k(self):
        """Test a reflection order that does not match the wedge."""
        with pytest.raises(DomainError):
            b_reflect(1.0, 1.0, unit_state(), 3)


class TestSurvival:
    """Tests for survival_prob and the exit masses."""

    def test_independent(self):
        """Test (2 Phi(1) - 1)^2."""
        result = survival_prob(1.0, unit_state())
        assert result.value == pytest.approx(0.466065, abs=1e-6)
        assert result.quality.quadrature_estimate_error < 1e-6

    def test_independent_with_drift(self):
        """Test the product of two drifted survival probabilities."""
        s = unit_state(x0=(1.0, 1.5), mu=(0.3, -0.2))
        expected = pi_survival(1.0, 0.8, 0.3) * pi_survival(1.5, 0.8, -0.2)
        assert survival_prob(0.8, s).value == pytest.approx(expected, rel=1e-6)

    def test_decreasing(self):
        """Test monotonicity in t for a correlated model."""
        s = unit_state(rho=-0.5, x0=(1.2, 0.9))
        values = [survival_prob(t, s).value for t in (0.25, 0.5, 1.0, 2.0)]
        assert all(b < a for a, b in zip(values[:-1], values[1:]))
        assert all(0.0 <= v <= 1.0 for v in values)

    def test_far_from_edges(self):
        """Test the shortcut when both edges are out of reach."""
        result = survival_prob(0.01, unit_state(x0=(50.0, 50.0)))
        assert result.value == pytest.approx(1.0, abs=1e-15)

    def test_exit_time_density_with_drift(self):
        """Test the hitting density of one edge times survival of the other."""
        s = unit_state(x0=(1.0, 1.5), mu=(0.3, -0.2))
        expected = pi_hit(1.0, 1.0, 0.3) * pi_survival(1.5, 1.0, -0.2)
        assert exit_time_density(1.0, s).value == pytest.approx(expected, rel=1e-6)

    def test_exit_masses_split(self):
        """Test that the symmetric model splits the default mass evenly."""
        s = unit_state()
        first = exit_probability(1.0, s).value
        second = exit_probability(1.0, s.tilde()).value
        assert first == pytest.approx((1.0 - 0.466065) / 2.0, abs=1e-6)
        assert first + second + survival_prob(1.0, s).value == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("rho", [-0.5, 0.3])
    def test_mass_balance_correlated(self, rho):
        """Test that survival and the two exit masses add up to one with drift."""
        s = unit_state(rho=rho, x0=(1.0, 1.2), mu=(0.2, -0.1))
        for t in (0.5, 1.0, 2.0):
            total = survival_prob(t, s).value + exit_probability(t, s).value + exit_probability(t, s.tilde()).value
            assert total == pytest.approx(1.0, abs=5e-5)


class TestJoint:
    """Tests for the joint default-time densities."""

    def test_g_joint_independent(self):
        """Test the product of two hitting densities."""
        expected = pi_hit(1.0, 0.5, 0.0) * pi_hit(1.0, 1.0, 0.0)
        result = g_joint(0.5, 1.0, unit_state())
        assert result.value == pytest.approx(expected, rel=1e-7)
        assert result.value == pytest.approx(0.100444, abs=1e-6)

    def test_g_tail_independent(self):
        """Test a hitting density times a survival probability."""
        expected = pi_hit(1.0, 0.5, 0.0) * pi_survival(1.0, 1.0, 0.0)
        assert g_tail(0.5, 1.0, unit_state()).value == pytest.approx(expected, rel=1e-7)

    def test_g_tail_is_integral_of_g_joint(self):
        """Test that g_tail(s, u) - g_tail(s, v) integrates g_joint over (u, v)."""
        s = unit_state(rho=-0.5, x0=(1.0, 1.2))
        mass = integrate_1d(
            lambda ts: np.array([g_joint(0.4, float(t), s).value for t in ts]), 0.9, 1.6,
            QuadConfig(rel_tol=1e-7),
        )
        difference = g_tail(0.4, 0.9, s).value - g_tail(0.4, 1.6, s).value
        assert mass.value == pytest.approx(difference, rel=1e-6)

    def test_l_kernel_independent(self):
        """Test Chapman-Kolmogorov through the default time."""
        expected = pi_hit(1.0, 0.5, 0.0) * pi_tilde(0.8, 1.0, 1.0, 0.0)
        assert l_kernel(0.5, 1.0, 0.8, unit_state()).value == pytest.approx(expected, rel=1e-6)

    def test_l_kernel_nonpositive_level(self):
        """Test that no mass sits at or below the barrier."""
        assert l_kernel(0.5, 1.0, 0.0, unit_state()).value == 0.0

    @pytest.mark.slow
    def test_p_kernel_independent(self):
        """Test P(tau1 < t) times the killed Gaussian of the survivor."""
        expected = (1.0 - pi_survival(1.0, 1.0, 0.0)) * pi_tilde(1.0, 1.0, 1.0, 0.0)
        result = p_kernel(1.0, 1.0, unit_state(), QuadConfig(rel_tol=1e-7))
        assert result.value == pytest.approx(expected, rel=1e-4)

    def test_g_integral_independent(self):
        """Test the hitting density of firm 2 times P(tau1 < t)."""
        expected = pi_hit(1.0, 1.0, 0.0) * (1.0 - pi_survival(1.0, 1.0, 0.0))
        assert g_integral(1.0, 1.0, unit_state()).value == pytest.approx(expected, rel=1e-6)

    def test_singular_exponent(self):
        """Test gamma at reference angles."""
        assert singular_exponent(math.pi / 2) == pytest.approx(0.0)
        assert singular_exponent(2.0 * math.pi / 3) == pytest.approx(-0.25)

    @pytest.mark.parametrize("rho", [-0.5, 0.5])
    def test_singular_slope(self, rho):
        """Test the log-log slope of g_joint(t - h, t) as h -> 0."""
        s = unit_state(rho=rho)
        near, nearer = 1e-4, 1e-6
        ratio = g_joint(1.0 - near, 1.0, s).value / g_joint(1.0 - nearer, 1.0, s).value
        slope = math.log(ratio) / math.log(near / nearer)
        assert slope == pytest.approx(singular_exponent(s.alpha), abs=0.02)

    @pytest.mark.slow
    def test_g_integral_obtuse(self):
        """Test that the singular end converges for alpha > pi/2."""
        s = unit_state(rho=0.5)
        result = g_integral(1.0, 1.0, s)
        assert math.isfinite(result.value)
        assert result.value > 0.0

    def test_times_ordered(self):
        """Test s >= t."""
        with pytest.raises(DomainError):
            g_joint(1.0, 0.5, unit_state())
        with pytest.raises(DomainError):
            g_tail(1.0, 1.0, unit_state())
        with pytest.raises(DomainError):
            g_integral(2.0, 1.0, unit_state())


class TestGaussianSanity:
    """Cross-checks against scipy.stats."""

    def test_survival_single_edge(self):
        """Test pi_survival against the reflection principle written with norm.cdf."""
        x, u = 0.6, 2.0
        expected = norm.cdf(x / math.sqrt(u)) - norm.cdf(-x / math.sqrt(u))
        assert pi_survival(x, u, 0.0) == pytest.approx(expected, rel=1e-12)


class TestExitOnset:
    """Tests for exit_onset."""

    def test_independent_edge(self):
        """Test the onset against the hitting probability of the z1 = 0 line at rho = 0."""
        s = unit_state(mu=(0.3, -0.2))
        onset = exit_onset(s)
        assert 0.0 < onset < 1.0 / 8.5**2 + 1e-15
        assert 1.0 - pi_survival(1.0, 4.0 * onset, 0.3) > 1e-12
        assert exit_probability(onset, s).value == 0.0

    def test_drift_towards_edge(self):
        """Test that a drift towards the exit edge brings the onset forward."""
        assert exit_onset(unit_state(mu=(-20.0, 0.0))) < exit_onset(unit_state())

    def test_tighter_tolerance(self):
        """Test that a smaller absolute tolerance never delays the onset."""
        s = unit_state(rho=-0.3)
        assert exit_onset(s, QuadConfig(abs_tol=1e-20)) <= exit_onset(s)

    def test_no_mass_before_onset(self):
        """Test that integrals ending before the onset vanish."""
        s = unit_state()
        onset = exit_onset(s)
        assert g_integral(0.5 * onset, 1.0, s).value == 0.0
        assert p_kernel(1.0, 0.5 * onset, s).value == 0.0


class TestDiagnostics:
    """Tests for the quality reported by the nested quadratures."""

    @pytest.mark.parametrize(
        "driver,inner,args",
        [
            (g_integral, "g_joint", (1.0, 1.0)),
            (exit_probability, "exit_time_density", (1.0,)),
            (p_kernel, "l_kernel", (1.0, 1.0)),
        ],
    )
    def test_inner_clamp_is_kept(self, monkeypatch, driver, inner, args):
        """Test that a clamp inside the integrand shows in the outer result."""
        monkeypatch.setattr(densities, inner, lambda *a: DensityValue(0.1, EvalQuality(clamped=True)))
        s = unit_state()
        result = driver(*args, s)
        assert result.quality.clamped
        assert result.value == pytest.approx(0.1 * (1.0 - exit_onset(s)), rel=1e-9)

    def test_clean_run_is_not_clamped(self):
        """Test that an ordinary evaluation reports no clamp."""
        assert not g_integral(1.0, 1.0, unit_state()).quality.clamped


FIG4 = ["fig4-rho0.1", "fig4-rho-0.1"]


def fig4_states(name):
    model = get_scenario(name).model
    return build_model(model), tilde_model(model)


@pytest.fixture
def before_clamp(monkeypatch):
    """Smallest g_joint value seen by the clamp."""
    seen = []
    clamp = densities._clamp

    def recording(values, label, upper=None):
        if label == "g_joint":
            seen.append(float(np.min(values)))
        return clamp(values, label, upper)

    monkeypatch.setattr(densities, "_clamp", recording)
    return seen


class TestFigureModels:
    """Tests on the near-independent models with an oblique wedge."""

    @pytest.mark.parametrize("name", FIG4)
    def test_g_joint_not_negative(self, name, before_clamp):
        """Test g_joint across (onset, u) before the clamp."""
        u = 1.9
        for s in fig4_states(name):
            onset = exit_onset(s)
            for sigma in (1.01 * onset, 2.0 * onset, 10.0 * onset, 0.5, 1.0, 1.5, 1.85, 1.899):
                result = g_joint(sigma, u, s)
                assert not result.quality.truncation_flag
                assert not result.quality.clamped
        assert before_clamp
        assert min(before_clamp) >= -NEGATIVE_NOISE

    @pytest.mark.slow
    @pytest.mark.parametrize("name", FIG4)
    def test_g_integral_clean(self, name, before_clamp):
        """Test the BothAlive integral at u = 1.9 end to end."""
        for s in fig4_states(name):
            result = g_integral(1.9, 1.9, s)
            assert result.value > 0.0
            assert not result.quality.truncation_flag
            assert not result.quality.clamped
        assert min(before_clamp) >= -NEGATIVE_NOISE
