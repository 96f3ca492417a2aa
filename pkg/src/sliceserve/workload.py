"""Reproducible workloads: one task, an ingest-rate sweep, or a Poisson task stream."""

from dataclasses import dataclass

import numpy as np

from sliceserve.units import US_PER_S, s_to_us


@dataclass(frozen=True)
class PredictionTask:
    task_id: int
    num_instances: int
    deadline_us: int
    arrival_us: int = 0

    def __post_init__(self):
        if self.num_instances < 1:
            raise ValueError(f"task {self.task_id}: num_instances must be >= 1, got {self.num_instances}")
        if self.deadline_us <= 0:
            raise ValueError(f"task {self.task_id}: deadline must be positive")


@dataclass(frozen=True)
class SingleTask:
    num_instances: int
    deadline_us: int

    def validate(self):
        if self.num_instances < 1:
            raise ValueError("workload.num_instances: must be >= 1")
        if self.deadline_us <= 0:
            raise ValueError("workload.deadline: must be positive")


@dataclass(frozen=True)
class RateSweep:
    """One task per ingest rate with ``N = rate * D``; tasks spaced ``spacing_us`` apart."""

    rates: tuple
    deadline_us: int
    spacing_us: int = None

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))

    def validate(self):
        if self.deadline_us <= 0:
            raise ValueError("workload.deadline: must be positive")
        if not self.rates:
            raise ValueError("workload.rates: must be non-empty")
        for k, r in enumerate(self.rates):
            if not r > 0:
                raise ValueError(f"workload.rates[{k}]: must be positive, got {r}")
            if self.task_size(r) < 1:
                raise ValueError(f"workload.rates[{k}]: rate {r} yields no instances within the deadline")
        if self.spacing_us is not None and self.spacing_us < 0:
            raise ValueError("workload.spacing: must be non-negative")

    def task_size(self, rate):
        return int(round(rate * self.deadline_us / US_PER_S))


@dataclass(frozen=True)
class Poisson:
    """Poisson task arrivals at ``mean_rate`` tasks/second; task sizes uniform on [size_low, size_high]."""

    mean_rate: float
    size_low: int
    size_high: int
    deadline_us: int
    horizon_us: int
    seed: int = 0

    def validate(self):
        if not self.mean_rate > 0:
            raise ValueError("workload.mean_rate: must be positive")
        if not 1 <= self.size_low <= self.size_high:
            raise ValueError("workload.task_size: need 1 <= low <= high")
        if self.deadline_us <= 0:
            raise ValueError("workload.deadline: must be positive")
        if self.horizon_us <= 0:
            raise ValueError("workload.horizon: must be positive")


def generate_tasks(spec):
    """Expand a workload spec into tasks ordered by arrival time."""
    spec.validate()
    if isinstance(spec, SingleTask):
        return [PredictionTask(0, spec.num_instances, spec.deadline_us, 0)]
    if isinstance(spec, RateSweep):
        spacing = spec.deadline_us if spec.spacing_us is None else spec.spacing_us
        return [
            PredictionTask(k, spec.task_size(rate), spec.deadline_us, k * spacing)
            for k, rate in enumerate(spec.rates)
        ]
    if isinstance(spec, Poisson):
        rng = np.random.default_rng(spec.seed)
        tasks = []
        now = 0
        while True:
            now += s_to_us(rng.exponential(1.0 / spec.mean_rate))
            if now > spec.horizon_us:
                break
            size = int(rng.integers(spec.size_low, spec.size_high, endpoint=True))
            tasks.append(PredictionTask(len(tasks), size, spec.deadline_us, now))
        return tasks
    raise TypeError(f"unknown workload spec {type(spec).__name__}")
