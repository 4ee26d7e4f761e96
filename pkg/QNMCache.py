"""
QNMCache — thread-safe namespaced memo for expensive derived objects.

Mathematical values never go stale, so there is no TTL. Entries live until
invalidated or evicted (oldest insertion first once maxsize is reached).

Usage:
    from QNMCache import QNMCache, default_cache

    cache = QNMCache(maxsize=256)
    group = cache.get_or_compute("clifford", 2, lambda: _enumerate(2))
    print(cache.stats())

Namespaces in default_cache:
    clifford      enumerated Clifford groups by qubit count
    scheme        schemes built from descriptors, keyed by canonical JSON
    effective     effective channels per (scheme id, attack digest)
    deficiency    design deficiencies per (ensemble digest, notion, t)

Each EncryptionScheme also owns a private QNMCache with namespaces enc,
dec (per-key channels) and avg (key-averaged channels).

None results are cached like any other value.
"""

from __future__ import annotations

import logging
import threading
from typing import Any, Callable

log = logging.getLogger("qnmlab.cache")

_SENTINEL = object()   # marks an empty store slot


class QNMCache:
    """
    Thread-safe in-memory memo.

    Args:
        maxsize: Maximum number of entries before oldest-first eviction. 0 = unlimited.
    """

    def __init__(self, maxsize: int = 0):
        self._maxsize = maxsize
        self._lock    = threading.Lock()
        self._store: dict[tuple, Any] = {}
        self._hits    = 0
        self._misses  = 0

    # ── Core API ───────────────────────────────────────────────────────────────

    def get(self, namespace: str, key: Any, default: Any = None) -> Any:
        """Get a cached value, or default when missing."""
        cache_key = (namespace, _make_hashable(key))
        with self._lock:
            value = self._store.get(cache_key, _SENTINEL)
            if value is _SENTINEL:
                self._misses += 1
                return default
            self._hits += 1
            return value

    def set(self, namespace: str, key: Any, value: Any) -> None:
        cache_key = (namespace, _make_hashable(key))
        with self._lock:
            if cache_key not in self._store and self._maxsize and len(self._store) >= self._maxsize:
                # dicts keep insertion order, so the first key is the oldest
                oldest = next(iter(self._store))
                del self._store[oldest]
                log.debug(f"QNMCache: evicted {oldest[0]}:{oldest[1]!r}")
            self._store[cache_key] = value

    def delete(self, namespace: str, key: Any) -> bool:
        """Remove a specific cache entry. Returns True if it existed."""
        cache_key = (namespace, _make_hashable(key))
        with self._lock:
            return self._store.pop(cache_key, _SENTINEL) is not _SENTINEL

    def invalidate(self, namespace: str) -> int:
        """Remove all entries for a namespace. Returns count removed."""
        with self._lock:
            keys_to_del = [k for k in self._store if k[0] == namespace]
            for k in keys_to_del:
                del self._store[k]
        return len(keys_to_del)

    def clear(self) -> int:
        """Remove all cached entries."""
        with self._lock:
            count = len(self._store)
            self._store.clear()
        return count

    # ── Helpers ────────────────────────────────────────────────────────────────

    def get_or_compute(self, namespace: str, key: Any, compute_fn: Callable[[], Any]) -> Any:
        """
        Return the cached value, or call compute_fn() and cache its result.

        compute_fn runs outside the lock; two threads racing on the same key
        may both compute, and the later result wins. Values are deterministic
        so either is correct.
        """
        cache_key = (namespace, _make_hashable(key))
        with self._lock:
            value = self._store.get(cache_key, _SENTINEL)
            if value is not _SENTINEL:
                self._hits += 1
                return value
            self._misses += 1

        value = compute_fn()
        self.set(namespace, key, value)
        return value

    # ── Stats ──────────────────────────────────────────────────────────────────

    @property
    def size(self) -> int:
        return len(self._store)

    @property
    def hit_rate(self) -> float:
        total = self._hits + self._misses
        return self._hits / total if total else 0.0

    def stats(self) -> dict:
        return {
            "entries":  self.size,
            "hits":     self._hits,
            "misses":   self._misses,
            "hit_rate": round(self.hit_rate, 3),
            "maxsize":  self._maxsize,
        }

    def __repr__(self) -> str:
        return f"QNMCache(entries={self.size}, maxsize={self._maxsize}, hit_rate={self.hit_rate:.1%})"


def _make_hashable(key: Any) -> Any:
    if isinstance(key, list):
        return tuple(_make_hashable(k) for k in key)
    if isinstance(key, dict):
        return tuple(sorted((k, _make_hashable(v)) for k, v in key.items()))
    return key


# Process-wide cache shared by designs, schemes and security
default_cache = QNMCache(maxsize=4096)
