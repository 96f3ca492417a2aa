"""Ingest-rate sweeps, the sweep CSV format and the JSON run report."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from sliceserve.scheduler import SchedulerConfig
from sliceserve.sim import EXPECTED, SAMPLED, SimConfig, run_simulation
from sliceserve.workload import RateSweep, SingleTask

SWEEP_SCHEMA = "sliceserve-sweep/1"
REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SweepRow:
    rate: float
    counts: tuple
    theoretical_p_eff: float
    measured_p_eff: float
    throughput: float
    p50_ms: float
    p95_ms: float
    p99_ms: float
    drop_rate: float
    # measured effective accuracy of each fixed sub-model; used for figures only
    baselines: tuple = ()


def parse_rates(text):
    """Parse ``"4:3748:4,3750"`` style lists; ``start:stop:step`` ranges include ``stop``."""
    rates = []
    for part in (p.strip() for p in str(text).split(",")):
        if not part:
            continue
        if ":" in part:
            fields = part.split(":")
            if len(fields) != 3:
                raise ValueError(f"bad rate range {part!r}; expected start:stop:step")
            start, stop, step = (float(f) for f in fields)
            if step <= 0:
                raise ValueError(f"bad rate range {part!r}; step must be positive")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            rates.extend(start + k * step for k in range(max(n, 0)))
        else:
            rates.append(float(part))
    return rates


def _point_seed(seed, index):
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def point_config(profile_set, rate, deadline_us, index=0, num_workers=1, seed=None,
                 scheduler=SchedulerConfig(), fixed_submodel=None, parallel=False):
    """Simulation config of one sweep point: a single task of ``rate * D`` instances."""
    n = RateSweep((rate,), deadline_us).task_size(rate)
    return SimConfig(
        profile_set=profile_set,
        workload=SingleTask(n, deadline_us),
        num_workers=num_workers,
        correctness=EXPECTED if seed is None else SAMPLED,
        seed=None if seed is None else _point_seed(seed, index),
        scheduler=scheduler,
        fixed_submodel=fixed_submodel,
        parallel=parallel,
    )


def run_sweep(profile_set, deadline_us, rates, num_workers=1, seed=None,
              scheduler=SchedulerConfig(), baselines=False, parallel=False):
    """Simulate every rate point independently (queues drained between points)."""
    RateSweep(tuple(rates), deadline_us).validate()
    rows = []
    for k, rate in enumerate(rates):
        kw = dict(index=k, num_workers=num_workers, seed=seed, scheduler=scheduler, parallel=parallel)
        m = run_simulation(point_config(profile_set, rate, deadline_us, **kw))
        fixed = ()
        if baselines:
            fixed = tuple(
                run_simulation(point_config(profile_set, rate, deadline_us, fixed_submodel=i, **kw)).measured_p_eff
                for i in range(1, profile_set.K + 1)
            )
        rows.append(SweepRow(
            rate, m.minibatches_per_submodel, m.theoretical_p_eff, m.measured_p_eff, m.throughput,
            m.latency_p50_ms, m.latency_p95_ms, m.latency_p99_ms, m.drop_rate, fixed,
        ))
    return rows


def submodel_column(slice_rate):
    return f"n_r{slice_rate:g}"


def sweep_header(profile_set):
    return (
        ["rate_instances_per_s"]
        + [submodel_column(r) for r in profile_set.slice_rates]
        + ["theoretical_p_eff", "measured_p_eff", "throughput", "p50_ms", "p95_ms", "p99_ms", "drop_rate"]
    )


def fmt(value):
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return f"{value:.12g}"


def write_sweep_csv(rows, profile_set, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SWEEP_SCHEMA}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(sweep_header(profile_set))
        for r in rows:
            writer.writerow(
                [fmt(r.rate)] + [str(c) for c in r.counts]
                + [fmt(v) for v in (r.theoretical_p_eff, r.measured_p_eff, r.throughput,
                                    r.p50_ms, r.p95_ms, r.p99_ms, r.drop_rate)]
            )


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def _json_float(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def metrics_summary(m, profile_set):
    return {
        "num_tasks": m.num_tasks,
        "num_instances": m.num_instances,
        "on_time_instances": m.on_time_instances,
        "skipped_tasks": m.skipped_tasks,
        "theoretical_p_eff": m.theoretical_p_eff,
        "measured_p_eff": m.measured_p_eff,
        "on_time_fraction": m.on_time_fraction,
        "drop_rate": m.drop_rate,
        "throughput": m.throughput,
        "latency_ms": {"p50": _json_float(m.latency_p50_ms), "p95": _json_float(m.latency_p95_ms),
                       "p99": _json_float(m.latency_p99_ms)},
        "minibatches_per_submodel": {
            submodel_column(r): c for r, c in zip(profile_set.slice_rates, m.minibatches_per_submodel)
        },
    }


def task_row(r):
    return {
        "task_id": r.task_id,
        "worker_id": r.worker_id,
        "arrival_ms": r.arrival_us / 1000,
        "start_ms": r.start_us / 1000,
        "num_instances": r.num_instances,
        "num_minibatches": r.num_minibatches,
        "counts": list(r.counts),
        "theoretical_p_eff": r.theoretical_p_eff,
        "measured_p_eff": r.measured_p_eff,
        "on_time_instances": r.on_time_instances,
        "dropped_instances": r.dropped_instances,
    }


def run_report(config_doc, config, metrics):
    """JSON-ready report: config echo, one row per (task, worker), aggregate summary."""
    doc = dict(config_doc)
    doc["profile"] = config.profile_set.to_document()
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": doc,
        "summary": metrics_summary(metrics, config.profile_set),
        "workers": [metrics_summary(w, config.profile_set) for w in metrics.workers],
        "rows": [task_row(r) for r in metrics.tasks],
    }
