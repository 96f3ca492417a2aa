"""Discrete-event simulation of the predictor -> message queue -> inference worker pipeline.

Time is virtual and measured in integer microseconds. A worker advances its
clock by ``t_i`` for every mini-batch it runs on sub-model ``i``. Workers never
interact once the predictor has partitioned a task, so the single-threaded
event loop and the thread-pool mode produce identical metrics.
"""

import heapq
import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from sliceserve.cache import DEFAULT_BUCKET_US, DEFAULT_CAPACITY, ScheduleCache
from sliceserve.scheduler import SchedulerConfig, SchedulingInstance, objective_value
from sliceserve.units import US_PER_S, us_to_ms
from sliceserve.workload import PredictionTask, generate_tasks

log = logging.getLogger(__name__)

EXPECTED = "expected"
SAMPLED = "sampled"


class ConfigError(ValueError):
    """Invalid simulation configuration; the message starts with the offending field path."""


class QueueMessage(NamedTuple):
    instance_ref: int
    deadline_us: int
    task_id: int


@dataclass(frozen=True)
class TaskHeader:
    task_id: int
    arrival_us: int
    deadline_us: int
    num_messages: int


class MessageQueue:
    """FIFO of per-instance messages plus the header announcing each task's message count."""

    def __init__(self):
        self._headers = deque()
        self._messages = deque()

    def __len__(self):
        return len(self._messages)

    def announce(self, header):
        self._headers.append(header)

    def put(self, message):
        self._messages.append(message)

    def extend(self, messages):
        self._messages.extend(messages)

    def next_arrival(self):
        return self._headers[0].arrival_us if self._headers else None

    def pop_task(self):
        """Pop the oldest task's header and every message carrying its id."""
        header = self._headers.popleft()
        queue, task_id = self._messages, header.task_id
        messages = []
        take = messages.append
        while queue and queue[0][2] == task_id:
            take(queue.popleft())
        return header, messages


def predictor_enqueue(task, queues, mini_batch_size):
    """Wrap each instance of ``task`` in a message and push it to ``queues``.

    With several queues, instances are cut into chunks of ``mini_batch_size``
    (the last chunk takes the remainder) and dealt round-robin, so every worker
    receives whole mini-batches.
    """
    if not queues:
        raise ValueError("at least one queue is required")
    b = len(queues)
    if b == 1:
        assignment = [list(range(task.num_instances))]
    else:
        assignment = [[] for _ in range(b)]
        n_chunks = -(-task.num_instances // mini_batch_size)
        for c in range(n_chunks):
            lo = c * mini_batch_size
            hi = min(lo + mini_batch_size, task.num_instances)
            assignment[c % b].extend(range(lo, hi))
    for queue, refs in zip(queues, assignment):
        if not refs:
            continue
        queue.announce(TaskHeader(task.task_id, task.arrival_us, task.deadline_us, len(refs)))
        queue.extend(QueueMessage(ref, task.deadline_us, task.task_id) for ref in refs)


@dataclass(frozen=True)
class SimConfig:
    profile_set: object
    workload: object
    num_workers: int = 1
    correctness: str = EXPECTED
    seed: int = None
    scheduler: SchedulerConfig = SchedulerConfig()
    cache_capacity: int = DEFAULT_CAPACITY
    cache_bucket_us: int = DEFAULT_BUCKET_US
    schedule_overhead_us: int = 0
    fixed_submodel: int = None
    parallel: bool = False

    def validate(self):
        if self.num_workers < 1:
            raise ConfigError(f"num_workers: must be >= 1, got {self.num_workers}")
        if self.correctness not in (EXPECTED, SAMPLED):
            raise ConfigError(f"correctness.mode: expected 'expected' or 'sampled', got {self.correctness!r}")
        if (self.correctness == SAMPLED) != (self.seed is not None):
            raise ConfigError("correctness.seed: required for sampled mode and only allowed there")
        if self.scheduler.node_budget < 0:
            raise ConfigError("scheduler.node_budget: must be >= 0")
        if self.scheduler.dp_resolution_us is not None and self.scheduler.dp_resolution_us < 1:
            raise ConfigError("scheduler.dp_resolution: must be at least 1us")
        if self.cache_capacity < 1:
            raise ConfigError("scheduler.cache_size: must be >= 1")
        if self.cache_bucket_us < 1:
            raise ConfigError("scheduler.cache_bucket: must be at least 1us")
        if self.schedule_overhead_us < 0:
            raise ConfigError("scheduler.overhead: must be >= 0")
        if self.fixed_submodel is not None and not 1 <= self.fixed_submodel <= self.profile_set.K:
            raise ConfigError(f"fixed_submodel: must be in 1..{self.profile_set.K}")
        if not isinstance(self.workload, (list, tuple)):
            try:
                self.workload.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def make_cache(self):
        return ScheduleCache(self.cache_capacity, self.cache_bucket_us, self.scheduler)


@dataclass(frozen=True)
class MiniBatchRecord:
    submodel: int
    size: int
    completion_us: int
    on_time: bool


@dataclass(frozen=True)
class TaskResult:
    task_id: int
    worker_id: int
    arrival_us: int
    start_us: int
    num_instances: int
    num_minibatches: int
    counts: tuple
    theoretical_p_eff: float
    minibatches: tuple
    correct: float

    @property
    def on_time_instances(self):
        return sum(mb.size for mb in self.minibatches if mb.on_time)

    @property
    def dropped_instances(self):
        return self.num_instances - self.on_time_instances

    @property
    def measured_p_eff(self):
        return self.correct / self.num_instances


@dataclass(frozen=True)
class SimMetrics:
    num_tasks: int
    num_instances: int
    on_time_instances: int
    theoretical_p_eff: float
    measured_p_eff: float
    on_time_fraction: float
    drop_rate: float
    throughput: float
    latency_p50_ms: float
    latency_p95_ms: float
    latency_p99_ms: float
    minibatches_per_submodel: tuple
    skipped_tasks: int = 0
    tasks: tuple = field(default=(), repr=False)
    workers: tuple = field(default=(), repr=False)


def measure_effective_accuracy(minibatches, num_instances, profile_set, correctness=EXPECTED, rng=None):
    """Correct on-time instances divided by ``num_instances``.

    ``expected`` credits ``p_i`` per on-time instance; ``sampled`` draws each
    instance's correctness from ``rng``.
    """
    correct = _count_correct(minibatches, profile_set, correctness, rng)
    return correct / num_instances if num_instances else 0.0


def _count_correct(minibatches, profile_set, correctness, rng):
    p = profile_set.accuracies
    if correctness == EXPECTED:
        return math.fsum(p[mb.submodel - 1] * mb.size for mb in minibatches if mb.on_time)
    if rng is None:
        raise ValueError("sampled correctness needs a random generator")
    return int(sum(int(rng.binomial(mb.size, p[mb.submodel - 1])) for mb in minibatches if mb.on_time))


def _execution_order(profile_set):
    # most accurate first; ties keep index order
    return sorted(range(profile_set.K), key=lambda i: (-profile_set.accuracies[i], i))


class InferenceWorker:
    """Consumes whole tasks from one queue, schedules them and runs their mini-batches."""

    def __init__(self, worker_id, queue, config, cache=None, rng=None, clock=0):
        self.worker_id = worker_id
        self.queue = queue
        self.config = config
        self.cache = cache if cache is not None else config.make_cache()
        self.rng = rng
        self.clock = clock
        self.results = []
        self.skipped = 0

    def next_event_time(self):
        arrival = self.queue.next_arrival()
        return None if arrival is None else max(self.clock, arrival)

    def step(self):
        header, messages = self.queue.pop_task()
        start = max(self.clock, header.arrival_us)
        if len(messages) != header.num_messages:
            log.warning(
                "worker %d: task %d has %d of %d messages; skipping",
                self.worker_id, header.task_id, len(messages), header.num_messages,
            )
            self.skipped += 1
            self.clock = start
            return
        result = self._run_task(header, len(messages), start)
        self.results.append(result)

    def run(self):
        while self.next_event_time() is not None:
            self.step()

    def _choose(self, n_mb, budget_us):
        cfg, ps = self.config, self.config.profile_set
        if budget_us <= 0:
            return (0,) * ps.K, 0.0
        if cfg.fixed_submodel is not None:
            counts = [0] * ps.K
            i = cfg.fixed_submodel - 1
            counts[i] = min(n_mb, budget_us // ps.latencies_us[i])
            return tuple(counts), objective_value(counts, ps.accuracies, n_mb)
        policy, _ = self.cache.lookup_or_schedule(SchedulingInstance(ps, budget_us, n_mb))
        return policy.counts, policy.theoretical_effective_accuracy

    def _run_task(self, header, n, start):
        cfg, ps = self.config, self.config.profile_set
        s_mb = ps.mini_batch_size
        n_mb = -(-n // s_mb)
        sizes = [s_mb] * (n // s_mb) + ([n % s_mb] if n % s_mb else [])
        due = header.arrival_us + header.deadline_us
        begin = start + cfg.schedule_overhead_us
        counts, theoretical = self._choose(n_mb, due - begin)

        records = []
        clock = begin if any(counts) else start
        t = ps.latencies_us
        for i in _execution_order(ps):
            for _ in range(counts[i]):
                clock += t[i]
                records.append(MiniBatchRecord(i + 1, sizes[len(records)], clock, clock <= due))
        self.clock = clock
        correct = _count_correct(records, ps, cfg.correctness, self.rng)
        return TaskResult(
            header.task_id, self.worker_id, header.arrival_us, start, n, n_mb,
            tuple(counts), theoretical, tuple(records), correct,
        )


def _percentiles(results):
    lat, weight = [], []
    for r in results:
        for mb in r.minibatches:
            if mb.on_time:
                lat.append(mb.completion_us - r.arrival_us)
                weight.append(mb.size)
    if not lat:
        return (math.nan,) * 3
    samples = np.repeat(np.asarray(lat, dtype=float), weight)
    return tuple(us_to_ms(float(v)) for v in np.percentile(samples, [50, 95, 99]))


def _summarize(results, profile_set, skipped=0, workers=()):
    """Pool task results; effective accuracy is averaged over workers when given."""
    n = sum(r.num_instances for r in results)
    on_time = sum(r.on_time_instances for r in results)
    per_model = [0] * profile_set.K
    for r in results:
        for mb in r.minibatches:
            per_model[mb.submodel - 1] += 1

    if workers:
        active = [w for w in workers if w.num_instances]
        measured = global_effective_accuracy(active) if active else 0.0
        theoretical = math.fsum(w.theoretical_p_eff for w in active) / len(active) if active else 0.0
    elif n:
        measured = math.fsum(r.correct for r in results) / n
        theoretical = math.fsum(r.theoretical_p_eff * r.num_instances for r in results) / n
    else:
        measured = theoretical = 0.0

    completions = [mb.completion_us for r in results for mb in r.minibatches]
    throughput = 0.0
    if completions and on_time:
        span = max(completions) - min(r.arrival_us for r in results)
        throughput = on_time * US_PER_S / span if span > 0 else 0.0
    f_t = on_time / n if n else 1.0
    p50, p95, p99 = _percentiles(results)
    return SimMetrics(
        num_tasks=len({r.task_id for r in results}),
        num_instances=n,
        on_time_instances=on_time,
        theoretical_p_eff=theoretical,
        measured_p_eff=measured,
        on_time_fraction=f_t,
        drop_rate=1.0 - f_t,
        throughput=throughput,
        latency_p50_ms=p50,
        latency_p95_ms=p95,
        latency_p99_ms=p99,
        minibatches_per_submodel=tuple(per_model),
        skipped_tasks=skipped,
        tasks=tuple(sorted(results, key=lambda r: (r.task_id, r.worker_id))),
        workers=tuple(workers),
    )


def worker_process(worker_id, queue, config, clock=0, cache=None, rng=None):
    """Drain ``queue`` with one inference worker and return its metrics."""
    worker = InferenceWorker(worker_id, queue, config, cache, rng, clock)
    worker.run()
    return _summarize(worker.results, config.profile_set, worker.skipped)


def global_effective_accuracy(per_worker):
    """Unweighted mean of the workers' measured effective accuracy."""
    if not per_worker:
        raise ValueError("need at least one worker result")
    return math.fsum(w.measured_p_eff for w in per_worker) / len(per_worker)


def _worker_rngs(config):
    if config.correctness != SAMPLED:
        return [None] * config.num_workers
    seqs = np.random.SeedSequence(config.seed).spawn(config.num_workers)
    return [np.random.default_rng(s) for s in seqs]


def run_simulation(config):
    """Run the full pipeline described by ``config``; deterministic for a given config."""
    config.validate()
    workload = config.workload
    tasks = list(workload) if isinstance(workload, (list, tuple)) else generate_tasks(workload)
    for task in tasks:
        if not isinstance(task, PredictionTask):
            raise ConfigError("workload: explicit task lists must contain PredictionTask items")
    tasks.sort(key=lambda task: (task.arrival_us, task.task_id))

    queues = [MessageQueue() for _ in range(config.num_workers)]
    for task in tasks:
        predictor_enqueue(task, queues, config.profile_set.mini_batch_size)

    cache = config.make_cache()
    workers = [
        InferenceWorker(wid, queue, config, cache, rng)
        for wid, (queue, rng) in enumerate(zip(queues, _worker_rngs(config)))
    ]
    if config.parallel and len(workers) > 1:
        with ThreadPoolExecutor(max_workers=len(workers)) as pool:
            list(pool.map(InferenceWorker.run, workers))
    else:
        # event order: virtual time, then worker id, then sequence number
        events = []
        seq = 0
        for w in workers:
            t = w.next_event_time()
            if t is not None:
                heapq.heappush(events, (t, w.worker_id, seq))
                seq += 1
        while events:
            _, wid, _ = heapq.heappop(events)
            w = workers[wid]
            w.step()
            t = w.next_event_time()
            if t is not None:
                seq += 1
                heapq.heappush(events, (t, wid, seq))

    per_worker = [_summarize(w.results, config.profile_set, w.skipped) for w in workers]
    results = [r for w in workers for r in w.results]
    return _summarize(results, config.profile_set, sum(w.skipped for w in workers), per_worker)
