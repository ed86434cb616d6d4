"""
Cache - Thread-safe memo of survival denominators.

The joint survival probability of a window-relative elapsed time is the denominator
of lambda1, lambda2 and both conditional distributions; one grid point needs it up
to four times and neighbouring firms share it through the tilde state.
"""

import logging
from collections import OrderedDict
from threading import Lock
from typing import Any, Callable, Generic, Hashable, NamedTuple, Tuple, TypeVar

from .geometry import WedgeState
from .quadrature import QuadConfig

logger = logging.getLogger(__name__)

V = TypeVar("V")

_MISSING = object()


class SurvivalKey(NamedTuple):
    """Everything a survival evaluation depends on, as exact floats."""
    z: Tuple[float, float]
    alpha: float
    m: Tuple[float, float]
    elapsed: float
    quad: QuadConfig


def survival_key(state: WedgeState, elapsed: float, q: QuadConfig) -> SurvivalKey:
    return SurvivalKey(
        z=(float(state.z[0]), float(state.z[1])),
        alpha=float(state.alpha),
        m=(float(state.m[0]), float(state.m[1])),
        elapsed=float(elapsed),
        quad=q,
    )


class CacheStats(NamedTuple):
    size: int
    max_size: int
    hits: int
    misses: int

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


class Cache(Generic[V]):
    """
    Least-recently-used memo guarded by a lock.

    Values are computed outside the lock; when two threads race on one key the
    first stored value wins and both callers receive it.
    """

    def __init__(self, max_size: int = 4096, enabled: bool = True):
        """
        Args:
            max_size: Entries kept before the least recently used is dropped.
            enabled: When False every lookup misses and nothing is stored.
        """
        if max_size < 1:
            raise ValueError(f"max_size must be >= 1, got {max_size}")
        self.max_size = max_size
        self.enabled = enabled
        self._entries: "OrderedDict[Hashable, V]" = OrderedDict()
        self._lock = Lock()
        self._hits = 0
        self._misses = 0

    def lookup(self, key: Hashable) -> Any:
        """Stored value, or the module sentinel on a miss."""
        if not self.enabled:
            return _MISSING
        with self._lock:
            if key not in self._entries:
                self._misses += 1
                return _MISSING
            self._entries.move_to_end(key)
            self._hits += 1
            return self._entries[key]

    def store(self, key: Hashable, value: V) -> V:
        """Store value unless another thread got there first; return the kept value."""
        if not self.enabled:
            return value
        with self._lock:
            if key in self._entries:
                return self._entries[key]
            self._entries[key] = value
            if len(self._entries) > self.max_size:
                dropped, _ = self._entries.popitem(last=False)
                logger.debug("survival memo full, dropped %s", dropped)
            return value

    def get_or_compute(self, key: Hashable, compute: Callable[[], V]) -> V:
        found = self.lookup(key)
        if found is not _MISSING:
            return found
        return self.store(key, compute())

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            self._hits = 0
            self._misses = 0

    @property
    def size(self) -> int:
        with self._lock:
            return len(self._entries)

    @property
    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(len(self._entries), self.max_size, self._hits, self._misses)

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._entries

    def __len__(self) -> int:
        return self.size


SURVIVAL_CACHE: "Cache[Any]" = Cache()
