"""
Tests for the cache module - the survival memo.
"""

import threading

import pytest

from wedge_intensity.cache import Cache, SurvivalKey, survival_key
from wedge_intensity.geometry import ModelParams, build_model
from wedge_intensity.quadrature import DEFAULT_QUAD, QuadConfig

STATE = build_model(ModelParams(mu=(0.1, -0.2), sigma1=1.2, sigma2=0.5, rho=-0.3, x0=(1.0, 1.5)))


class TestCache:
    """Tests for Cache."""

    def test_miss_then_hit(self):
        """Test that the second lookup reuses the stored value."""
        cache = Cache()
        calls = []

        def compute():
            calls.append(1)
            return 0.25

        assert cache.get_or_compute("k", compute) == 0.25
        assert cache.get_or_compute("k", compute) == 0.25
        assert len(calls) == 1
        assert cache.stats.hits == 1
        assert cache.stats.misses == 1
        assert cache.stats.hit_rate == pytest.approx(0.5)

    def test_falsy_values_are_kept(self):
        """Test that zero and None count as stored values."""
        cache = Cache()
        calls = []

        def compute():
            calls.append(1)
            return None

        cache.get_or_compute("none", compute)
        cache.get_or_compute("none", compute)
        cache.get_or_compute("zero", lambda: 0.0)
        assert cache.get_or_compute("zero", lambda: 1.0) == 0.0
        assert len(calls) == 1

    def test_disabled(self):
        """Test that a disabled cache computes every time and stores nothing."""
        cache = Cache(enabled=False)
        calls = []

        def compute():
            calls.append(1)
            return 1.0

        cache.get_or_compute("k", compute)
        cache.get_or_compute("k", compute)
        assert len(calls) == 2
        assert len(cache) == 0

    def test_least_recently_used_is_dropped(self):
        """Test that a recent lookup protects an entry from eviction."""
        cache = Cache(max_size=2)
        cache.get_or_compute("a", lambda: 1.0)
        cache.get_or_compute("b", lambda: 2.0)
        cache.get_or_compute("a", lambda: 0.0)
        cache.get_or_compute("c", lambda: 3.0)
        assert "a" in cache
        assert "b" not in cache
        assert cache.size == 2

    def test_first_store_wins(self):
        """Test that storing an existing key keeps the earlier value."""
        cache = Cache()
        assert cache.store("k", 1.0) == 1.0
        assert cache.store("k", 2.0) == 1.0

    def test_clear(self):
        """Test that clearing drops entries and statistics."""
        cache = Cache()
        cache.get_or_compute("k", lambda: 1.0)
        cache.clear()
        assert cache.stats == (0, cache.max_size, 0, 0)

    def test_invalid_size(self):
        """Test a non-positive capacity."""
        with pytest.raises(ValueError):
            Cache(max_size=0)

    def test_concurrent_access(self):
        """Test that racing threads all see one stored value."""
        cache = Cache()
        results = []

        def worker(value):
            results.append(cache.get_or_compute("shared", lambda: value))

        threads = [threading.Thread(target=worker, args=(float(i),)) for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        assert len(results) == 8
        assert cache.size == 1
        assert len(set(results)) <= 8


class TestSurvivalKey:
    """Tests for survival_key."""

    def test_fields(self):
        """Test that the key carries the state, time and configuration."""
        key = survival_key(STATE, 1.5, DEFAULT_QUAD)
        assert isinstance(key, SurvivalKey)
        assert key.alpha == STATE.alpha
        assert key.elapsed == 1.5
        assert key.quad is DEFAULT_QUAD

    def test_equal_inputs_share_a_key(self):
        """Test that rebuilding the same state hits the same entry."""
        again = build_model(ModelParams(mu=(0.1, -0.2), sigma1=1.2, sigma2=0.5, rho=-0.3, x0=(1.0, 1.5)))
        assert survival_key(STATE, 1.0, DEFAULT_QUAD) == survival_key(again, 1.0, QuadConfig())
        assert hash(survival_key(STATE, 1.0, DEFAULT_QUAD)) == hash(survival_key(again, 1.0, QuadConfig()))

    def test_nearby_times_differ(self):
        """Test that the key keeps every digit of the elapsed time."""
        assert survival_key(STATE, 0.1, DEFAULT_QUAD) != survival_key(STATE, 0.1 + 2e-16, DEFAULT_QUAD)

    def test_tolerance_matters(self):
        """Test that another tolerance is another entry."""
        assert survival_key(STATE, 1.0, DEFAULT_QUAD) != survival_key(STATE, 1.0, QuadConfig(rel_tol=1e-6))
