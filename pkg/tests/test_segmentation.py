from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitphase.errors import InvalidParameterError, InvalidStrideError
from gaitphase.segmentation import (
    LIFTOFF_PHASE,
    CleaningConfig,
    ContactConfig,
    FsrFrame,
    StrideEvents,
    TransitionExclusionConfig,
    clean_strides,
    detect_ground_contact,
    exclude_transitions,
    extract_stride_events,
    fsr_sum,
    fsr_sum_series,
    label_gait_phase,
    label_series,
)

FS = 200.0


def contact_from(spans, n):
    c = np.zeros(n, dtype=bool)
    for a, b in spans:
        c[a:b] = True
    return c


def test_fsr_sum():
    assert fsr_sum(FsrFrame(1.0, 2.0, 3.5)) == 6.5
    np.testing.assert_array_equal(fsr_sum_series([1, 2], [0, 1], [3, 3]), [4.0, 6.0])


def test_contact_is_strictly_above_threshold():
    f = np.array([0.0, 30.0, 30.0001, 50.0, 29.0])
    np.testing.assert_array_equal(detect_ground_contact(f, ContactConfig(30.0)), [0, 0, 1, 1, 0])


def test_contact_config_and_empty_input():
    with pytest.raises(InvalidParameterError):
        ContactConfig(0.0)
    with pytest.raises(InvalidParameterError):
        detect_ground_contact([], ContactConfig(1.0))
    with pytest.raises(InvalidParameterError):
        extract_stride_events([])


def test_extract_events_drops_partial_strides():
    # starts in contact (no touchdown at 0), two full strides, trailing partial
    c = contact_from([(0, 5), (10, 20), (40, 52), (70, 75)], 90)
    events = extract_stride_events(c)
    assert events == [StrideEvents(10, 20, 40), StrideEvents(40, 52, 70)]


def test_extract_events_none_for_constant_contact():
    assert extract_stride_events(np.ones(100, bool)) == []
    assert extract_stride_events(np.zeros(100, bool)) == []


def test_stride_events_validation():
    with pytest.raises(InvalidStrideError):
        StrideEvents(10, 10, 20)
    with pytest.raises(InvalidStrideError):
        StrideEvents(10, 25, 20)
    ev = StrideEvents(0, 126, 200)
    assert ev.n_samples == 200 and ev.duration(FS) == 1.0


def test_label_liftoff_is_exactly_63():
    ev = StrideEvents(100, 100 + 131, 100 + 211)
    g = label_gait_phase(ev)
    assert g[0] == 0.0
    assert g[ev.liftoff - ev.touchdown] == LIFTOFF_PHASE
    assert len(g) == ev.n_samples
    assert g[-1] < 100.0
    # the sample after the last one would be 100, i.e. the next touchdown's 0
    assert g[-1] == pytest.approx(100.0 - 37.0 / 80.0)


def test_label_two_linear_segments():
    g = label_gait_phase(StrideEvents(0, 63, 100))
    np.testing.assert_allclose(g, np.arange(100.0), atol=1e-12)
    g = label_gait_phase(StrideEvents(0, 4, 6))
    np.testing.assert_allclose(g, [0, 15.75, 31.5, 47.25, 63.0, 81.5])


def test_label_series_nan_outside_strides():
    events = [StrideEvents(2, 5, 8), StrideEvents(8, 10, 14)]
    g = label_series(events, 16)
    assert np.isnan(g[:2]).all() and np.isnan(g[14:]).all()
    assert g[8] == 0.0 and g[5] == LIFTOFF_PHASE and g[10] == LIFTOFF_PHASE


def _stride(duration_s, gyro=100.0, accel=9.81):
    n = int(round(duration_s * FS))
    ev = StrideEvents(0, int(0.63 * n), n)
    return ev, {"gyro_z": np.full(n, gyro), "accel_y": np.full(n, accel)}


def test_cleaning_criteria_in_order():
    strides = [
        _stride(1.0),
        _stride(1.0, gyro=0.5),
        _stride(1.0, accel=0.05),
        _stride(0.7),
        _stride(1.5),
        _stride(1.0, gyro=0.5, accel=0.0),  # first criterion wins
    ]
    kept, report = clean_strides(strides, CleaningConfig(), FS)
    assert len(kept) == 1 and report.n_kept == 1 and report.n_input == 6
    assert [r.criterion for r in report.removed] == [
        "angular_velocity", "vertical_acceleration", "duration_short", "duration_long", "angular_velocity",
    ]
    assert report.counts() == {"angular_velocity": 2, "vertical_acceleration": 1, "duration_short": 1, "duration_long": 1}
    d = report.to_dict()
    assert d["n_kept"] == 1 and d["removed"][3]["value"] == pytest.approx(1.5)


def test_cleaning_boundaries_are_inclusive():
    kept, _ = clean_strides([_stride(0.8), _stride(1.4)], CleaningConfig(), FS)
    assert len(kept) == 2


def test_cleaning_uses_magnitude():
    kept, _ = clean_strides([_stride(1.0, gyro=-50.0, accel=-9.0)], CleaningConfig(), FS)
    assert len(kept) == 1


def test_cleaning_config_validation():
    with pytest.raises(InvalidParameterError):
        CleaningConfig(min_stride_duration=1.5, max_stride_duration=1.4)
    with pytest.raises(InvalidParameterError):
        CleaningConfig(min_peak_angular_velocity=0.0)


def test_transition_exclusion_counts_2m_plus_1():
    keep = exclude_transitions(2000, [1000], TransitionExclusionConfig())
    assert (~keep).sum() == 2 * 258 + 1
    assert not keep[1000 - 258] and not keep[1000 + 258]
    assert keep[1000 - 259] and keep[1000 + 259]


def test_transition_exclusion_clips_and_validates():
    keep = exclude_transitions(100, [3], TransitionExclusionConfig(10))
    assert (~keep).sum() == 14
    with pytest.raises(InvalidParameterError):
        exclude_transitions(100, [100], TransitionExclusionConfig(10))
    with pytest.raises(InvalidParameterError):
        TransitionExclusionConfig(-1)


@settings(max_examples=80, deadline=None)
@given(
    spans=st.lists(st.tuples(st.integers(2, 40), st.integers(2, 40)), min_size=2, max_size=12),
    lead=st.integers(1, 20),
)
def test_events_round_trip(spans, lead):
    # build contact from (stance, swing) lengths and recover them exactly
    c = [False] * lead
    truth = []
    t = lead
    for stance, swing in spans:
        truth.append((t, t + stance))
        c += [True] * stance + [False] * swing
        t += stance + swing
    c += [True]  # closing touchdown
    events = extract_stride_events(np.array(c))
    expected = [StrideEvents(a, b, truth[i + 1][0] if i + 1 < len(truth) else t) for i, (a, b) in enumerate(truth)]
    assert events == expected


@settings(max_examples=80, deadline=None)
@given(n_stance=st.integers(1, 300), n_swing=st.integers(1, 300))
def test_label_properties(n_stance, n_swing):
    g = label_gait_phase(StrideEvents(0, n_stance, n_stance + n_swing))
    assert g[0] == 0.0 and g[n_stance] == LIFTOFF_PHASE
    assert np.all(np.diff(g) > 0)
    assert np.all((g >= 0) & (g < 100))


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 3000),
    margin=st.integers(0, 300),
    data=st.data(),
)
def test_exclusion_properties(n, margin, data):
    idx = data.draw(st.lists(st.integers(0, n - 1), max_size=5))
    keep = exclude_transitions(n, idx, TransitionExclusionConfig(margin))
    for i in range(n):
        near = any(abs(i - j) <= margin for j in idx)
        assert keep[i] == (not near)
