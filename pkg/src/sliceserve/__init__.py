"""Deadline-aware scheduling and simulation for serving sliced (width-elastic) models."""

from sliceserve.profiles import ProfileSet, SubModelProfile, load_profile_set, load_profile_file
from sliceserve.scheduler import SchedulingInstance, SchedulingPolicy, schedule
from sliceserve.cache import ScheduleCache, cache_lookup_or_schedule
from sliceserve.sim import SimConfig, SimMetrics, run_simulation

__version__ = "0.1.0"

__all__ = [
    "ProfileSet",
    "SubModelProfile",
    "load_profile_set",
    "load_profile_file",
    "SchedulingInstance",
    "SchedulingPolicy",
    "schedule",
    "ScheduleCache",
    "cache_lookup_or_schedule",
    "SimConfig",
    "SimMetrics",
    "run_simulation",
]
