import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sliceserve.profiles import (
    ProfileError,
    ProfileSet,
    load_profile_file,
    load_profile_set,
    max_workload,
    single_model_effective_accuracy,
)

XRAY_ROWS = [(1.0, 0.7937, 45.12), (0.75, 0.7188, 34.56), (0.5, 0.7094, 22.72), (0.25, 0.6512, 15.68)]


def _doc(rows, **extra):
    doc = {
        "name": "test",
        "mini_batch_size": 32,
        "sub_models": [{"slice_rate": r, "accuracy": p, "batch_latency_ms": t} for r, p, t in rows],
    }
    doc.update(extra)
    return json.dumps(doc)


def test_load_xray_document():
    ps = load_profile_set(_doc(XRAY_ROWS))
    assert ps.K == 4
    assert ps.mini_batch_size == 32
    assert ps.slice_rates == (1.0, 0.75, 0.5, 0.25)
    assert ps.accuracies == (0.7937, 0.7188, 0.7094, 0.6512)
    assert ps.latencies_us == (45_120, 34_560, 22_720, 15_680)
    assert [sm.index for sm in ps.sub_models] == [1, 2, 3, 4]


def test_bundled_xray_matches_table(xray):
    for sm, (r, p, t) in zip(xray.sub_models, XRAY_ROWS):
        assert sm.slice_rate == r
        assert sm.accuracy == pytest.approx(p, abs=1e-12)
        assert sm.batch_latency_ms == t


def test_single_sub_model():
    ps = load_profile_set(_doc([(1.0, 1.0, 1.0)]))
    assert ps.K == 1


def test_zero_latency_names_field():
    with pytest.raises(ProfileError, match="batch_latency"):
        load_profile_set(_doc([(1.0, 0.9, 0.0)]))


def test_percent_unit_converts():
    ps = load_profile_set(_doc([(1.0, 79.37, 45.12)], accuracy_unit="percent"))
    assert ps.accuracies[0] == pytest.approx(0.7937)


def test_percent_values_without_flag_rejected():
    with pytest.raises(ProfileError, match="accuracy"):
        load_profile_set(_doc([(1.0, 79.37, 45.12)]))


@pytest.mark.parametrize(
    "text, match",
    [
        ("{not json", "JSON"),
        (json.dumps([1, 2]), "object"),
        (json.dumps({"name": "x", "sub_models": []}), "mini_batch_size"),
        (_doc([]), "at least one"),
        (_doc([(1.0, 0.9, 2.0), (1.0, 0.8, 1.0)]), "distinct"),
        (_doc([(1.5, 0.9, 2.0)]), "slice_rate"),
        (_doc([(1.0, 0.9, 2.0)], accuracy_unit="permille"), "accuracy_unit"),
        (json.dumps({"name": "x", "mini_batch_size": 0, "sub_models": []}), "mini_batch_size"),
        (json.dumps({"name": "x", "mini_batch_size": 4, "sub_models": [{"slice_rate": 1.0, "accuracy": 0.5}]}),
         "batch_latency_ms"),
    ],
)
def test_invalid_documents(text, match):
    with pytest.raises(ProfileError, match=match):
        load_profile_set(text)


def test_missing_file_names_path(tmp_path):
    path = tmp_path / "missing.json"
    with pytest.raises(ProfileError, match="missing.json"):
        load_profile_file(path)


def test_fingerprint_tracks_content():
    a = ProfileSet.from_tuples(XRAY_ROWS, mini_batch_size=32)
    b = ProfileSet.from_tuples(XRAY_ROWS, mini_batch_size=32, name="other name")
    c = ProfileSet.from_tuples(XRAY_ROWS, mini_batch_size=16)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_round_trip_document(xray):
    again = load_profile_set(json.dumps(xray.to_document()))
    assert again.fingerprint() == xray.fingerprint()


def test_derived_times(xray):
    assert xray.t_fast_us(25) == 25 * 15_680
    assert xray.t_slow_us(25) == 25 * 45_120


@pytest.mark.parametrize("i, expected", [(1, 709.2198581560284), (4, 2040.8163265306123)])
def test_max_workload_xray(xray, i, expected):
    # 32 / 0.04512 and 32 / 0.01568
    assert max_workload(xray, i) == pytest.approx(expected, rel=1e-12)


def test_max_workload_unit_case():
    ps = ProfileSet.from_tuples([(1.0, 0.5, 1000.0)], mini_batch_size=1)
    assert max_workload(ps, 1) == 1.0


def test_max_workload_index_range(xray):
    with pytest.raises(IndexError):
        max_workload(xray, 0)
    with pytest.raises(IndexError):
        max_workload(xray, 5)


def test_single_model_effective_accuracy_examples(xray):
    w1 = max_workload(xray, 1)
    assert single_model_effective_accuracy(xray, 1, 100) == pytest.approx(0.7937)
    assert single_model_effective_accuracy(xray, 1, w1) == pytest.approx(0.7937)
    assert single_model_effective_accuracy(xray, 1, 2 * w1) == pytest.approx(0.39685, abs=1e-12)


@pytest.mark.parametrize("w", [0, -5])
def test_single_model_effective_accuracy_rejects_workload(xray, w):
    with pytest.raises(ValueError):
        single_model_effective_accuracy(xray, 1, w)


@given(
    p=st.floats(0, 1),
    t_ms=st.floats(0.01, 1e4),
    s_mb=st.integers(1, 512),
    w1=st.floats(1e-3, 1e7),
    w2=st.floats(1e-3, 1e7),
)
def test_effective_accuracy_bounded_and_monotone(p, t_ms, s_mb, w1, w2):
    ps = ProfileSet.from_tuples([(1.0, p, t_ms)], mini_batch_size=s_mb)
    lo, hi = sorted((w1, w2))
    a_lo = single_model_effective_accuracy(ps, 1, lo)
    a_hi = single_model_effective_accuracy(ps, 1, hi)
    assert 0 <= a_hi <= a_lo <= p
    w_max = max_workload(ps, 1)
    assert (a_lo == p) == (lo <= w_max or p == 0)


@given(t1=st.integers(1, 10**7), t2=st.integers(1, 10**7))
def test_max_workload_decreasing_in_latency(t1, t2):
    ps = ProfileSet.from_tuples([(1.0, 0.5, t1 / 1000), (0.5, 0.4, t2 / 1000)], mini_batch_size=32)
    if t1 < t2:
        assert max_workload(ps, 1) > max_workload(ps, 2)
    elif t1 == t2:
        assert max_workload(ps, 1) == max_workload(ps, 2)


def test_continuity_at_max_workload(xray):
    w = max_workload(xray, 2)
    left = single_model_effective_accuracy(xray, 2, w)
    right = single_model_effective_accuracy(xray, 2, w * (1 + 1e-12))
    assert left == pytest.approx(right, rel=1e-9)


def test_profile_is_immutable(xray):
    with pytest.raises(AttributeError):
        xray.mini_batch_size = 64
