"""Durations are integer microseconds everywhere inside the package."""

import math
import re

US_PER_MS = 1_000
US_PER_S = 1_000_000

_DURATION_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(us|ms|s)?\s*$")
_SCALE = {"us": 1, "ms": US_PER_MS, "s": US_PER_S}


def ms_to_us(value):
    return int(round(value * US_PER_MS))


def s_to_us(value):
    return int(round(value * US_PER_S))


def us_to_ms(value):
    return value / US_PER_MS


def us_to_s(value):
    return value / US_PER_S


def parse_duration(text, default_unit="s"):
    """Parse ``"8s"``, ``"8000ms"``, ``"250us"`` or a bare number into microseconds.

    Bare numbers are read in ``default_unit``.
    """
    if isinstance(text, (int, float)):
        value, unit = float(text), default_unit
    else:
        match = _DURATION_RE.match(str(text))
        if match is None:
            raise ValueError(f"invalid duration {text!r}; expected e.g. '8s' or '8000ms'")
        value, unit = float(match.group(1)), match.group(2) or default_unit
    if not math.isfinite(value):
        raise ValueError(f"invalid duration {text!r}")
    return int(round(value * _SCALE[unit]))
