"""Sub-model profiles: slice rate, accuracy and per-mini-batch latency."""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from sliceserve.units import US_PER_S, ms_to_us


class ProfileError(ValueError):
    """Raised when a profile document is malformed or violates an invariant."""


@dataclass(frozen=True)
class SubModelProfile:
    index: int
    slice_rate: float
    accuracy: float
    batch_latency_ms: float

    def __post_init__(self):
        if not 0.0 < self.slice_rate <= 1.0:
            raise ProfileError(f"sub_models[{self.index}].slice_rate must be in (0, 1], got {self.slice_rate}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ProfileError(f"sub_models[{self.index}].accuracy must be in [0, 1], got {self.accuracy}")
        if not self.batch_latency_ms > 0.0:
            raise ProfileError(
                f"sub_models[{self.index}].batch_latency must be positive, got {self.batch_latency_ms} ms"
            )
        if ms_to_us(self.batch_latency_ms) < 1:
            raise ProfileError(f"sub_models[{self.index}].batch_latency is below 1 microsecond")

    @property
    def batch_latency_us(self):
        return ms_to_us(self.batch_latency_ms)


@dataclass(frozen=True)
class ProfileSet:
    """An immutable, validated set of K sub-models sharing one mini-batch size."""

    name: str
    mini_batch_size: int
    sub_models: tuple

    def __post_init__(self):
        object.__setattr__(self, "sub_models", tuple(self.sub_models))
        if not isinstance(self.mini_batch_size, int) or self.mini_batch_size < 1:
            raise ProfileError(f"mini_batch_size must be a positive integer, got {self.mini_batch_size!r}")
        if not self.sub_models:
            raise ProfileError("sub_models must contain at least one entry")
        for expected, sm in enumerate(self.sub_models, start=1):
            if sm.index != expected:
                raise ProfileError(f"sub_models indices must be contiguous from 1; found {sm.index} at {expected}")
        rates = [sm.slice_rate for sm in self.sub_models]
        if len(set(rates)) != len(rates):
            raise ProfileError(f"sub_models slice_rate values must be distinct, got {rates}")

    @property
    def K(self):
        return len(self.sub_models)

    @property
    def accuracies(self):
        return tuple(sm.accuracy for sm in self.sub_models)

    @property
    def latencies_us(self):
        return tuple(sm.batch_latency_us for sm in self.sub_models)

    @property
    def slice_rates(self):
        return tuple(sm.slice_rate for sm in self.sub_models)

    def sub_model(self, i):
        if not 1 <= i <= self.K:
            raise IndexError(f"sub-model index {i} out of range 1..{self.K}")
        return self.sub_models[i - 1]

    def t_fast_us(self, num_minibatches):
        return num_minibatches * min(self.latencies_us)

    def t_slow_us(self, num_minibatches):
        return num_minibatches * max(self.latencies_us)

    def fingerprint(self):
        payload = json.dumps(
            [self.mini_batch_size, [(sm.slice_rate, sm.accuracy, sm.batch_latency_us) for sm in self.sub_models]],
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_document(self):
        return {
            "name": self.name,
            "mini_batch_size": self.mini_batch_size,
            "accuracy_unit": "fraction",
            "sub_models": [
                {"slice_rate": sm.slice_rate, "accuracy": sm.accuracy, "batch_latency_ms": sm.batch_latency_ms}
                for sm in self.sub_models
            ],
        }

    @classmethod
    def from_tuples(cls, rows, mini_batch_size=1, name="custom"):
        """Build from ``(slice_rate, accuracy, batch_latency_ms)`` rows in index order."""
        subs = [SubModelProfile(i, float(r), float(p), float(t)) for i, (r, p, t) in enumerate(rows, start=1)]
        return cls(name, mini_batch_size, tuple(subs))


def max_workload(profile_set, i):
    """Highest sustainable ingest rate of sub-model ``i`` in instances/second."""
    sm = profile_set.sub_model(i)
    return profile_set.mini_batch_size * US_PER_S / sm.batch_latency_us


def single_model_effective_accuracy(profile_set, i, expected_workload):
    """Effective accuracy of serving everything with sub-model ``i`` at ``expected_workload`` inst/s."""
    if not expected_workload > 0:
        raise ValueError(f"expected workload must be positive, got {expected_workload}")
    sm = profile_set.sub_model(i)
    w_max = max_workload(profile_set, i)
    if expected_workload <= w_max:
        return sm.accuracy
    return (w_max / expected_workload) * sm.accuracy


def _require(doc, key, kind, where):
    if key not in doc:
        raise ProfileError(f"{where}{key}: missing required field")
    value = doc[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ProfileError(f"{where}{key}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ProfileError(f"{where}{key}: expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ProfileError(f"{where}{key}: expected {kind.__name__}, got {value!r}")
    return value


def profile_from_document(doc):
    """Validate a decoded profile document and build a :class:`ProfileSet`."""
    if not isinstance(doc, dict):
        raise ProfileError("profile document must be a JSON object")
    name = _require(doc, "name", str, "")
    s_mb = _require(doc, "mini_batch_size", int, "")
    unit = doc.get("accuracy_unit", "fraction")
    if unit not in ("fraction", "percent"):
        raise ProfileError(f"accuracy_unit: expected 'fraction' or 'percent', got {unit!r}")
    entries = _require(doc, "sub_models", list, "")
    subs = []
    for i, entry in enumerate(entries, start=1):
        where = f"sub_models[{i}]."
        if not isinstance(entry, dict):
            raise ProfileError(f"sub_models[{i}]: expected an object")
        rate = _require(entry, "slice_rate", float, where)
        acc = _require(entry, "accuracy", float, where)
        latency = _require(entry, "batch_latency_ms", float, where)
        if unit == "percent":
            acc /= 100.0
        subs.append(SubModelProfile(i, rate, acc, latency))
    return ProfileSet(name, s_mb, tuple(subs))


def load_profile_set(document):
    """Parse a JSON profile document (text) into a validated :class:`ProfileSet`."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"profile is not valid JSON: {exc}") from exc
    return profile_from_document(doc)


def load_profile_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProfileError(f"cannot read profile file {path}: {exc.strerror or exc}") from exc
    return load_profile_set(text)


def builtin_profile_path(name):
    """Path of a bundled profile: ``xray``, ``cifar10`` or ``imagenet``."""
    path = resources.files("sliceserve") / "data" / f"{name}_resnet50.json"
    if not path.is_file():
        raise ProfileError(f"no bundled profile named {name!r}")
    return Path(str(path))


def builtin_profile(name):
    return load_profile_file(builtin_profile_path(name))
