"""Decode the JSON simulation config document into a :class:`SimConfig`."""

import json
from pathlib import Path

from sliceserve.cache import DEFAULT_BUCKET_US, DEFAULT_CAPACITY
from sliceserve.profiles import ProfileError, load_profile_file, profile_from_document
from sliceserve.scheduler import DEFAULT_NODE_BUDGET, SchedulerConfig
from sliceserve.sim import EXPECTED, ConfigError, SimConfig
from sliceserve.units import parse_duration
from sliceserve.workload import Poisson, RateSweep, SingleTask


def _get(doc, key, path, kind=None, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{path}{key}: missing required field")
        return default
    value = doc[key]
    if value is None and default is not ...:
        return default
    if kind is not None and (isinstance(value, bool) and kind is not bool or not isinstance(value, kind)):
        raise ConfigError(f"{path}{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _duration(doc, key, path, default=...):
    value = _get(doc, key, path, (str, int, float), default)
    if value is None:
        return None
    try:
        return parse_duration(value)
    except ValueError as exc:
        raise ConfigError(f"{path}{key}: {exc}") from exc


def _workload(doc):
    path = "workload."
    kind = _get(doc, "kind", path, str)
    if kind == "single":
        return SingleTask(_get(doc, "num_instances", path, int), _duration(doc, "deadline", path))
    if kind == "rate_sweep":
        rates = _get(doc, "rates", path, list)
        for k, r in enumerate(rates):
            if isinstance(r, bool) or not isinstance(r, (int, float)):
                raise ConfigError(f"{path}rates[{k}]: expected a number, got {r!r}")
        return RateSweep(tuple(rates), _duration(doc, "deadline", path), _duration(doc, "spacing", path, None))
    if kind == "poisson":
        size = _get(doc, "task_size", path, dict)
        return Poisson(
            float(_get(doc, "mean_rate", path, (int, float))),
            _get(size, "low", path + "task_size.", int),
            _get(size, "high", path + "task_size.", int),
            _duration(doc, "deadline", path),
            _duration(doc, "horizon", path),
            _get(doc, "seed", path, int, 0),
        )
    raise ConfigError(f"{path}kind: expected 'single', 'rate_sweep' or 'poisson', got {kind!r}")


def resolve_profile(value, base_dir):
    if isinstance(value, dict):
        return profile_from_document(value)
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute():
            path = Path(base_dir) / path
        return load_profile_file(path)
    raise ConfigError(f"profile: expected a path or an inline profile object, got {value!r}")


def sim_config_from_document(doc, base_dir="."):
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object")
    try:
        profile_set = resolve_profile(_get(doc, "profile", ""), base_dir)
    except ProfileError as exc:
        raise ConfigError(f"profile: {exc}") from exc

    correctness = _get(doc, "correctness", "", dict, {"mode": EXPECTED})
    mode = _get(correctness, "mode", "correctness.", str, EXPECTED)
    seed = _get(correctness, "seed", "correctness.", int, None)

    sched = _get(doc, "scheduler", "", dict, {})
    p = "scheduler."
    config = SimConfig(
        profile_set=profile_set,
        workload=_workload(_get(doc, "workload", "", dict)),
        num_workers=_get(doc, "num_workers", "", int, 1),
        correctness=mode,
        seed=seed,
        scheduler=SchedulerConfig(
            node_budget=_get(sched, "node_budget", p, int, DEFAULT_NODE_BUDGET),
            dp_resolution_us=_duration(sched, "dp_resolution", p, None),
        ),
        cache_capacity=_get(sched, "cache_size", p, int, DEFAULT_CAPACITY),
        cache_bucket_us=_duration(sched, "cache_bucket", p, None) or DEFAULT_BUCKET_US,
        schedule_overhead_us=_duration(sched, "overhead", p, None) or 0,
        fixed_submodel=_get(doc, "fixed_submodel", "", int, None),
        parallel=_get(doc, "parallel", "", bool, False),
    )
    config.validate()
    return config


def load_sim_config(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return doc, sim_config_from_document(doc, path.parent)
