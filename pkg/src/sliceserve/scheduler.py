"""Mini-batch to sub-model assignment that maximizes effective accuracy under a deadline.

The problem is a small integer program::

    maximize   sum_i n_i * p_i / N_mb
    subject to sum_i n_i       <= N_mb
               sum_i n_i * t_i <= D
               n_i >= 0, integer

``schedule`` handles the saturated case directly, runs LP-based branch-and-bound
otherwise, and falls back to a 2-D unbounded knapsack DP if branch-and-bound
runs out of node budget. ``schedule_brute_force`` is an exhaustive oracle.
"""

import enum
import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from sliceserve.lp import EPS_OBJ, GE, LE, LpProblem, LpStatus, solve_lp
from sliceserve.units import US_PER_S

log = logging.getLogger(__name__)

EPS_INT = 1e-6
EPS_TIME_US = 1
DEFAULT_NODE_BUDGET = 100_000
DEFAULT_ENUMERATION_BUDGET = 10**7


class Solver(enum.Enum):
    SHORTCUT = "Shortcut"
    BRANCH_AND_BOUND = "BranchAndBound"
    KNAPSACK_DP = "KnapsackDP"
    BRUTE_FORCE = "BruteForce"


class BranchAndBoundFailure(RuntimeError):
    """Branch-and-bound exhausted its node budget before the queue emptied."""


@dataclass(frozen=True)
class SchedulingInstance:
    profile_set: object
    deadline_us: int
    num_minibatches: int

    def __post_init__(self):
        if not isinstance(self.deadline_us, (int, np.integer)) or self.deadline_us <= 0:
            raise ValueError(f"deadline must be a positive integer number of microseconds, got {self.deadline_us!r}")
        if not isinstance(self.num_minibatches, (int, np.integer)) or self.num_minibatches < 1:
            raise ValueError(f"num_minibatches must be a positive integer, got {self.num_minibatches!r}")
        object.__setattr__(self, "deadline_us", int(self.deadline_us))
        object.__setattr__(self, "num_minibatches", int(self.num_minibatches))


@dataclass(frozen=True)
class SchedulingPolicy:
    counts: tuple
    theoretical_effective_accuracy: float
    solver_used: Solver
    nodes_explored: int = field(default=0, compare=False)

    @property
    def total(self):
        return sum(self.counts)


@dataclass(frozen=True)
class SchedulerConfig:
    node_budget: int = DEFAULT_NODE_BUDGET
    dp_resolution_us: int = None


def objective_value(counts, accuracies, num_minibatches):
    return math.fsum(n * p for n, p in zip(counts, accuracies)) / num_minibatches


def effective_accuracy(policy, instance):
    """Theoretical effective accuracy of ``policy`` (a policy or a count vector)."""
    counts = policy.counts if isinstance(policy, SchedulingPolicy) else tuple(policy)
    if len(counts) != instance.profile_set.K:
        raise ValueError(f"policy has {len(counts)} entries, profile set has {instance.profile_set.K} sub-models")
    return objective_value(counts, instance.profile_set.accuracies, instance.num_minibatches)


def is_feasible(counts, instance, slack_us=0):
    if len(counts) != instance.profile_set.K:
        return False
    if any(n < 0 or int(n) != n for n in counts):
        return False
    if sum(counts) > instance.num_minibatches:
        return False
    used = sum(int(n) * t for n, t in zip(counts, instance.profile_set.latencies_us))
    return used <= instance.deadline_us + slack_us


def _rank(counts):
    return (sum(counts), tuple(counts))


def _better(counts, value, best_counts, best_value):
    """True when (counts, value) beats the incumbent, tie-breaking deterministically."""
    if best_counts is None or value > best_value + EPS_OBJ:
        return True
    if value < best_value - EPS_OBJ:
        return False
    return _rank(counts) > _rank(best_counts)


def _policy(counts, instance, solver, nodes=0):
    counts = tuple(int(n) for n in counts)
    return SchedulingPolicy(counts, effective_accuracy(counts, instance), solver, nodes)


def saturating_submodel(profile_set):
    """Index of the most accurate sub-model; ties go to the larger slice rate."""
    best = max(profile_set.sub_models, key=lambda sm: (sm.accuracy, sm.slice_rate))
    return best.index


def schedule_brute_force(instance, budget=DEFAULT_ENUMERATION_BUDGET):
    """Enumerate every count vector with ``sum <= N_mb`` and keep the best feasible one."""
    ps = instance.profile_set
    k, n_mb, deadline = ps.K, instance.num_minibatches, instance.deadline_us
    if math.comb(n_mb + k, k) > budget:
        raise ValueError(f"enumeration of C({n_mb + k}, {k}) candidates exceeds budget {budget}")
    t, p = ps.latencies_us, ps.accuracies
    best_counts, best_value = None, None
    counts = [0] * k

    def visit(i, left, time_left):
        nonlocal best_counts, best_value
        if i == k:
            value = objective_value(counts, p, n_mb)
            if _better(counts, value, best_counts, best_value):
                best_counts, best_value = tuple(counts), value
            return
        for n in range(left + 1):
            if n * t[i] > time_left:
                break
            counts[i] = n
            visit(i + 1, left - n, time_left - n * t[i])
        counts[i] = 0

    visit(0, n_mb, deadline)
    return _policy(best_counts, instance, Solver.BRUTE_FORCE)


def root_relaxation(instance):
    """LP relaxation of the scheduling problem (integrality dropped)."""
    ps = instance.profile_set
    n_mb = instance.num_minibatches
    return LpProblem(
        ps.K,
        [p / n_mb for p in ps.accuracies],
        [
            ([1.0] * ps.K, LE, n_mb),
            ([t / US_PER_S for t in ps.latencies_us], LE, instance.deadline_us / US_PER_S),
        ],
    )


def _unit_row(k, i):
    row = [0.0] * k
    row[i] = 1.0
    return row


def _most_fractional(x):
    best_i, best_dist = -1, None
    for i, v in enumerate(x):
        frac = v - math.floor(v)
        if min(frac, 1.0 - frac) <= EPS_INT:
            continue
        dist = abs(frac - 0.5)
        if best_dist is None or dist < best_dist:
            best_i, best_dist = i, dist
    return best_i


def schedule_branch_and_bound(instance, node_budget=DEFAULT_NODE_BUDGET, on_node=None):
    """Best-first LP-based branch-and-bound.

    ``on_node(lp_bound, incumbent_value)`` is called after every LP solve.
    Raises :class:`BranchAndBoundFailure` if more than ``node_budget`` LPs
    would be needed.
    """
    ps = instance.profile_set
    k, n_mb, deadline = ps.K, instance.num_minibatches, instance.deadline_us
    t, p = ps.latencies_us, ps.accuracies

    best_counts, best_value = (0,) * k, 0.0
    for i in range(k):
        seed = [0] * k
        seed[i] = min(n_mb, deadline // t[i])
        value = objective_value(seed, p, n_mb)
        if _better(seed, value, best_counts, best_value):
            best_counts, best_value = tuple(seed), value

    seq = 0
    heap = [(-math.inf, seq, root_relaxation(instance))]
    nodes = 0
    while heap:
        neg_bound, _, problem = heapq.heappop(heap)
        if -neg_bound <= best_value + EPS_OBJ:
            continue
        if nodes >= node_budget:
            raise BranchAndBoundFailure(f"node budget {node_budget} exhausted with {len(heap) + 1} open nodes")
        solution = solve_lp(problem)
        nodes += 1
        if solution.status is not LpStatus.OPTIMAL:
            continue
        bound = solution.objective_value
        if on_node is not None:
            on_node(bound, best_value)
        if bound <= best_value + EPS_OBJ:
            continue
        x = solution.x
        branch = _most_fractional(x)
        if branch < 0:
            candidate = [int(round(v)) for v in x]
            if is_feasible(candidate, instance):
                value = objective_value(candidate, p, n_mb)
                if _better(candidate, value, best_counts, best_value):
                    best_counts, best_value = tuple(candidate), value
                continue
            # rounding pushed the point past the exact deadline; split on the largest residual
            residuals = [abs(v - round(v)) for v in x]
            branch = int(np.argmax(residuals))
            if residuals[branch] == 0.0:
                continue
        floor = math.floor(x[branch])
        row = _unit_row(k, branch)
        for child in (problem.with_constraint(row, GE, floor + 1), problem.with_constraint(row, LE, floor)):
            seq += 1
            heapq.heappush(heap, (-bound, seq, child))

    return _policy(best_counts, instance, Solver.BRANCH_AND_BOUND, nodes)


def default_dp_resolution_us(deadline_us):
    return max(deadline_us // 10_000, 1)


def schedule_knapsack_dp(instance, time_resolution_us=None):
    """2-D unbounded knapsack over (mini-batch count, discretized time).

    Item weights are ``ceil(t_i / delta)`` so any returned policy meets the
    exact deadline; coarse ``delta`` can cost optimality, never feasibility.
    """
    ps = instance.profile_set
    k, n_mb, deadline = ps.K, instance.num_minibatches, instance.deadline_us
    delta = default_dp_resolution_us(deadline) if time_resolution_us is None else int(time_resolution_us)
    if delta < 1:
        raise ValueError(f"time resolution must be at least 1 microsecond, got {time_resolution_us!r}")
    capacity = deadline // delta
    weights = [-(-t // delta) for t in ps.latencies_us]
    values = [p / n_mb for p in ps.accuracies]

    prev = np.zeros(capacity + 1)
    choice = np.full((n_mb + 1, capacity + 1), -1, dtype=np.int16)
    for j in range(1, n_mb + 1):
        best = np.full(capacity + 1, -np.inf)
        pick = np.full(capacity + 1, -1, dtype=np.int16)
        for i in range(k):
            w = weights[i]
            if w > capacity:
                continue
            cand = np.full(capacity + 1, -np.inf)
            cand[w:] = prev[: capacity + 1 - w] + values[i]
            take = cand > best + EPS_OBJ
            best[take] = cand[take]
            pick[take] = i
        skip = prev > best + EPS_OBJ
        best[skip] = prev[skip]
        pick[skip] = -1
        choice[j] = pick
        prev = best

    counts = [0] * k
    u = capacity
    for j in range(n_mb, 0, -1):
        i = choice[j, u]
        if i >= 0:
            counts[i] += 1
            u -= weights[i]
    return _policy(counts, instance, Solver.KNAPSACK_DP)


def schedule(instance, config=SchedulerConfig()):
    """Full scheduling path: saturation shortcut, then branch-and-bound, then DP fallback."""
    ps = instance.profile_set
    n_mb, deadline = instance.num_minibatches, instance.deadline_us
    if deadline >= ps.t_slow_us(n_mb):
        counts = [0] * ps.K
        counts[saturating_submodel(ps) - 1] = n_mb
        return _policy(counts, instance, Solver.SHORTCUT)
    try:
        return schedule_branch_and_bound(instance, node_budget=config.node_budget)
    except BranchAndBoundFailure as exc:
        log.warning("falling back to knapsack DP: %s", exc)
        return schedule_knapsack_dp(instance, config.dp_resolution_us)
