import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sliceserve.lp import EPS_OBJ, solve_lp
from sliceserve.profiles import ProfileSet
from sliceserve.scheduler import (
    EPS_TIME_US,
    BranchAndBoundFailure,
    SchedulerConfig,
    SchedulingInstance,
    SchedulingPolicy,
    Solver,
    effective_accuracy,
    is_feasible,
    root_relaxation,
    schedule,
    schedule_branch_and_bound,
    schedule_brute_force,
    schedule_knapsack_dp,
)

S = 1_000_000


def enumerate_optimum(instance):
    """Independent exhaustive optimum over all count vectors (no pruning, no tie rules)."""
    ps = instance.profile_set
    n = instance.num_minibatches
    best = 0.0
    for counts in itertools.product(range(n + 1), repeat=ps.K):
        if sum(counts) <= n and sum(c * t for c, t in zip(counts, ps.latencies_us)) <= instance.deadline_us:
            best = max(best, sum(c * p for c, p in zip(counts, ps.accuracies)) / n)
    return best


@st.composite
def instances(draw, max_k=4, max_n=12, max_t=10):
    k = draw(st.integers(1, max_k))
    p = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
    t = draw(st.lists(st.integers(1, max_t), min_size=k, max_size=k))
    n = draw(st.integers(1, max_n))
    d = draw(st.integers(1, n * max(t)))
    ps = ProfileSet.from_tuples([(1 - 0.1 * i, p[i], t[i] * 1000.0) for i in range(k)])
    return SchedulingInstance(ps, d * S, n)


# --- effective accuracy ---------------------------------------------------

def test_effective_accuracy_worked_example(four_models):
    inst = SchedulingInstance(four_models, 8 * S, 4)
    assert effective_accuracy((0, 1, 1, 2), inst) == pytest.approx(0.7475, abs=1e-12)
    assert effective_accuracy((4, 0, 0, 0), inst) == pytest.approx(0.90, abs=1e-12)
    assert effective_accuracy((0, 0, 0, 0), inst) == 0.0


def test_effective_accuracy_accepts_policy(four_models):
    inst = SchedulingInstance(four_models, 8 * S, 4)
    policy = SchedulingPolicy((0, 1, 1, 2), 0.0, Solver.BRUTE_FORCE)
    assert effective_accuracy(policy, inst) == pytest.approx(0.7475)


def test_effective_accuracy_dimension_mismatch(four_models):
    with pytest.raises(ValueError):
        effective_accuracy((1, 2), SchedulingInstance(four_models, 8 * S, 4))


@pytest.mark.parametrize("deadline, n", [(0, 1), (-5, 1), (S, 0)])
def test_instance_validation(four_models, deadline, n):
    with pytest.raises(ValueError):
        SchedulingInstance(four_models, deadline, n)


# --- schedule --------------------------------------------------------------

@pytest.mark.parametrize(
    "deadline_s, counts, value, solver",
    [
        (24, (4, 0, 0, 0), 0.90, Solver.SHORTCUT),
        (8, (0, 1, 1, 2), 0.7475, Solver.BRANCH_AND_BOUND),
        (3, (0, 0, 0, 3), 0.525, Solver.BRANCH_AND_BOUND),
    ],
)
def test_schedule_worked_example(four_models, deadline_s, counts, value, solver):
    policy = schedule(SchedulingInstance(four_models, deadline_s * S, 4))
    assert policy.counts == counts
    assert policy.theoretical_effective_accuracy == pytest.approx(value, abs=1e-12)
    assert policy.solver_used is solver


def test_worked_example_enumeration_oracle(four_models):
    # 70 candidate vectors with sum <= 4 over four sub-models
    assert sum(1 for c in itertools.product(range(5), repeat=4) if sum(c) <= 4) == 70
    for d, expected in [(24, 0.90), (8, 0.7475), (3, 0.525)]:
        assert enumerate_optimum(SchedulingInstance(four_models, d * S, 4)) == pytest.approx(expected, abs=1e-12)


def test_single_model_exact_fit():
    ps = ProfileSet.from_tuples([(1.0, 0.5, 1000.0)])
    policy = schedule(SchedulingInstance(ps, 7 * S, 7))
    assert policy.counts == (7,)
    assert policy.theoretical_effective_accuracy == 0.5


def test_nothing_fits(four_models):
    policy = schedule(SchedulingInstance(four_models, S // 2, 4))
    assert policy.counts == (0, 0, 0, 0)
    assert policy.theoretical_effective_accuracy == 0.0


def test_saturation_prefers_most_accurate_not_slowest():
    # the slowest model is not the most accurate here
    ps = ProfileSet.from_tuples([(1.0, 0.6, 5000.0), (0.5, 0.8, 1000.0)])
    policy = schedule(SchedulingInstance(ps, 100 * S, 3))
    assert policy.counts == (0, 3)
    assert policy.solver_used is Solver.SHORTCUT


def test_saturation_tie_goes_to_larger_slice_rate():
    ps = ProfileSet.from_tuples([(0.5, 0.8, 1000.0), (1.0, 0.8, 2000.0)])
    assert schedule(SchedulingInstance(ps, 100 * S, 3)).counts == (0, 3)


def test_non_monotone_profile():
    ps = ProfileSet.from_tuples([(1.0, 0.70, 4000.0), (0.75, 0.72, 3000.0), (0.5, 0.5, 1000.0)])
    inst = SchedulingInstance(ps, 7 * S, 4)
    assert schedule(inst).theoretical_effective_accuracy == pytest.approx(enumerate_optimum(inst), abs=1e-12)


def test_falls_back_to_dp_when_budget_exhausted(four_models):
    policy = schedule(SchedulingInstance(four_models, 8 * S, 4), SchedulerConfig(node_budget=0))
    assert policy.solver_used is Solver.KNAPSACK_DP
    assert policy.counts == (0, 1, 1, 2)


def test_xray_full_model_regime(xray):
    policy = schedule(SchedulingInstance(xray, 8 * S, 25))
    assert policy.counts == (25, 0, 0, 0)
    assert policy.theoretical_effective_accuracy == pytest.approx(0.7937)


# --- branch and bound -------------------------------------------------------

def test_bnb_worked_example(four_models):
    inst = SchedulingInstance(four_models, 8 * S, 4)
    policy = schedule_branch_and_bound(inst)
    assert policy.counts == schedule_brute_force(inst).counts == (0, 1, 1, 2)


def test_bnb_integral_root():
    ps = ProfileSet.from_tuples([(1.0, 0.9, 1000.0), (0.5, 0.1, 1000.0)])
    inst = SchedulingInstance(ps, 3 * S, 3)
    lp = solve_lp(root_relaxation(inst))
    assert lp.x == pytest.approx([3.0, 0.0])
    policy = schedule_branch_and_bound(inst)
    assert policy.counts == (3, 0)
    assert policy.nodes_explored == 1


def test_bnb_zero_budget_fails(four_models):
    with pytest.raises(BranchAndBoundFailure):
        schedule_branch_and_bound(SchedulingInstance(four_models, 8 * S, 4), node_budget=0)


@settings(max_examples=150, deadline=None)
@given(inst=instances())
def test_bnb_incumbent_never_exceeds_root_bound(inst):
    root = solve_lp(root_relaxation(inst)).objective_value
    seen = []
    policy = schedule_branch_and_bound(inst, on_node=lambda bound, incumbent: seen.append(incumbent))
    assert all(v <= root + EPS_OBJ for v in seen)
    assert policy.theoretical_effective_accuracy <= root + EPS_OBJ


# --- knapsack DP --------------------------------------------------------------

def test_dp_worked_example_exact(four_models):
    assert schedule_knapsack_dp(SchedulingInstance(four_models, 8 * S, 4), S).counts == (0, 1, 1, 2)


def test_dp_coarse_resolution_still_feasible(four_models):
    inst = SchedulingInstance(four_models, 8 * S, 4)
    policy = schedule_knapsack_dp(inst, 10 * S)
    assert is_feasible(policy.counts, inst)
    assert policy.theoretical_effective_accuracy <= 0.7475 + 1e-12


def test_dp_single_cell():
    ps = ProfileSet.from_tuples([(1.0, 1.0, 1000.0)])
    assert schedule_knapsack_dp(SchedulingInstance(ps, S, 1), S).counts == (1,)


def test_dp_default_resolution(xray):
    inst = SchedulingInstance(xray, 8 * S, 300)
    policy = schedule_knapsack_dp(inst)
    assert is_feasible(policy.counts, inst)
    exact = schedule(inst).theoretical_effective_accuracy
    # latencies are rounded up to whole cells, so the DP can only lose accuracy
    assert exact - 0.01 <= policy.theoretical_effective_accuracy <= exact + 1e-12


def test_dp_rejects_bad_resolution(four_models):
    with pytest.raises(ValueError):
        schedule_knapsack_dp(SchedulingInstance(four_models, 8 * S, 4), 0)


@settings(max_examples=150, deadline=None)
@given(inst=instances())
def test_dp_exact_on_integer_grid(inst):
    dp = schedule_knapsack_dp(inst, S)
    assert dp.theoretical_effective_accuracy == pytest.approx(enumerate_optimum(inst), abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(inst=instances(), divisor=st.integers(1, 20))
def test_dp_round_up_never_misses_deadline(inst, divisor):
    policy = schedule_knapsack_dp(inst, max(inst.deadline_us // divisor, 1))
    assert is_feasible(policy.counts, inst)


# --- brute force ---------------------------------------------------------------

def test_brute_force_single_model_closed_form():
    ps = ProfileSet.from_tuples([(1.0, 0.4, 3000.0)])
    for n in range(1, 8):
        for d in range(1, 30):
            assert schedule_brute_force(SchedulingInstance(ps, d * S, n)).counts == (min(n, d // 3),)


def test_brute_force_nothing_fits(four_models):
    policy = schedule_brute_force(SchedulingInstance(four_models, S // 3, 4))
    assert policy.counts == (0, 0, 0, 0)
    assert policy.theoretical_effective_accuracy == 0


def test_brute_force_budget(xray):
    with pytest.raises(ValueError, match="budget"):
        schedule_brute_force(SchedulingInstance(xray, 8 * S, 300))


def test_brute_force_tie_break_prefers_more_batches_then_lower_index():
    # (1,0) and (0,1) tie on value; (0,2) ties too but assigns more mini-batches
    ps = ProfileSet.from_tuples([(1.0, 0.6, 2000.0), (0.5, 0.3, 1000.0)])
    assert schedule_brute_force(SchedulingInstance(ps, 2 * S, 2)).counts == (0, 2)
    ps = ProfileSet.from_tuples([(1.0, 0.5, 1000.0), (0.5, 0.5, 1000.0)])
    assert schedule_brute_force(SchedulingInstance(ps, 1 * S, 2)).counts == (1, 0)


# --- properties -------------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(inst=instances())
def test_schedule_matches_brute_force(inst):
    ours = schedule(inst)
    oracle = schedule_brute_force(inst)
    assert abs(ours.theoretical_effective_accuracy - oracle.theoretical_effective_accuracy) <= EPS_OBJ
    assert is_feasible(ours.counts, inst, slack_us=EPS_TIME_US)
    assert ours.theoretical_effective_accuracy == effective_accuracy(ours.counts, inst)


@settings(max_examples=100, deadline=None)
@given(inst=instances())
def test_monotone_in_deadline(inst):
    values = [
        schedule(SchedulingInstance(inst.profile_set, d * S, inst.num_minibatches)).theoretical_effective_accuracy
        for d in range(1, inst.num_minibatches * max(inst.profile_set.latencies_us) // S + 2)
    ]
    assert all(b >= a - EPS_OBJ for a, b in zip(values, values[1:]))


@settings(max_examples=100, deadline=None)
@given(inst=instances())
def test_saturation_bounds(inst):
    ps = inst.profile_set
    n = inst.num_minibatches
    full = schedule(SchedulingInstance(ps, ps.t_slow_us(n), n))
    assert full.theoretical_effective_accuracy == pytest.approx(max(ps.accuracies))
    if min(ps.latencies_us) > 1:
        empty = schedule(SchedulingInstance(ps, min(ps.latencies_us) - 1, n))
        assert empty.theoretical_effective_accuracy == 0


def test_schedule_is_deterministic(xray):
    inst = SchedulingInstance(xray, 8 * S, 400)
    assert schedule(inst) == schedule(inst)
