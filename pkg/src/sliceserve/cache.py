"""LRU cache of scheduling decisions keyed by (deadline bucket, N_mb, profile fingerprint)."""

import threading
from collections import OrderedDict

from sliceserve.scheduler import SchedulerConfig, SchedulingInstance, schedule
from sliceserve.units import US_PER_MS

DEFAULT_BUCKET_US = 10 * US_PER_MS
DEFAULT_CAPACITY = 4096


class ScheduleCache:
    """Thread-safe LRU map from quantized scheduling instances to policies.

    Deadlines are floored to a ``bucket_us`` grid before scheduling, so a cached
    policy never runs past the caller's real deadline. Deadlines shorter than
    one bucket are used unquantized.
    """

    def __init__(self, capacity=DEFAULT_CAPACITY, bucket_us=DEFAULT_BUCKET_US, config=SchedulerConfig()):
        if capacity < 1:
            raise ValueError("cache capacity must be at least 1")
        if bucket_us < 1:
            raise ValueError("deadline bucket must be at least 1 microsecond")
        self.capacity = capacity
        self.bucket_us = bucket_us
        self.config = config
        self.hits = 0
        self.misses = 0
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def quantize(self, deadline_us):
        q = (deadline_us // self.bucket_us) * self.bucket_us
        return q if q > 0 else deadline_us

    def key(self, instance):
        return (
            self.quantize(instance.deadline_us),
            instance.num_minibatches,
            instance.profile_set.fingerprint(),
        )

    def __len__(self):
        return len(self._data)

    def __contains__(self, instance):
        return self.key(instance) in self._data

    def lookup_or_schedule(self, instance):
        """Return ``(policy, hit)``."""
        key = self.key(instance)
        with self._lock:
            policy = self._data.get(key)
            if policy is not None:
                self._data.move_to_end(key)
                self.hits += 1
                return policy, True
            self.misses += 1
        quantized = SchedulingInstance(instance.profile_set, key[0], instance.num_minibatches)
        policy = schedule(quantized, self.config)
        with self._lock:
            self._data[key] = policy
            self._data.move_to_end(key)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)
        return policy, False

    def clear(self):
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0


def cache_lookup_or_schedule(cache, instance):
    return cache.lookup_or_schedule(instance)
