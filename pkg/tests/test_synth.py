from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaitphase.errors import InvalidConfigError, InvalidSplitError
from gaitphase.segmentation import (
    LIFTOFF_PHASE,
    ContactConfig,
    detect_ground_contact,
    extract_stride_events,
    label_series,
)
from gaitphase.sessionio import MODES, write_session
from gaitphase.synth import (
    SAGITTAL,
    SynthConfig,
    channel_shapes,
    default_schedule,
    generate_corpus,
    generate_session,
    split_by_subject,
    split_counts,
)

NOISELESS = SynthConfig(noise=0.0)


def test_single_lw_stride_force_matches_events():
    s = generate_session(NOISELESS, schedule=(("LW", 0.0, 1),))
    assert len(s.events) == 1
    ev = s.events[0]
    contact = s.f_sum > 0
    # stance is exactly [touchdown, liftoff); the tail after the stride is the next stance
    assert contact[ev.touchdown:ev.liftoff].all()
    assert not contact[ev.liftoff:ev.next_touchdown].any()
    assert not contact[:ev.touchdown].any()
    assert contact[ev.next_touchdown:].all()
    thr = s.meta["contact_threshold"]
    assert extract_stride_events(detect_ground_contact(s.f_sum, ContactConfig(thr))) == s.events


def test_truth_labels_follow_the_63_percent_convention():
    s = generate_session(SynthConfig(), subject=2, session=1)
    for ev in s.events:
        assert s.phase[ev.touchdown] == 0.0
        assert s.phase[ev.liftoff] == LIFTOFF_PHASE
    in_stride = s.in_stride
    np.testing.assert_array_equal(label_series(s.events, s.n_samples)[in_stride], s.phase[in_stride])


def test_force_positive_exactly_in_stance():
    s = generate_session(SynthConfig(), subject=1)
    stance = np.zeros(s.n_samples, bool)
    for ev in s.events:
        stance[ev.touchdown:ev.liftoff] = True
    inside = slice(s.events[0].touchdown, s.events[-1].next_touchdown)
    np.testing.assert_array_equal(s.f_sum[inside] > 0, stance[inside])


def test_noiseless_segmentation_recovers_100_strides():
    schedule = (("LW", 0.0, 40), ("SA", 30.0, 30), ("LW", 0.0, 10), ("SD", -30.0, 20))
    s = generate_session(NOISELESS, subject=3, schedule=schedule)
    assert len(s.events) == 100
    found = extract_stride_events(detect_ground_contact(s.f_sum, ContactConfig(s.meta["contact_threshold"])))
    assert len(found) == 100
    for a, b in zip(found, s.events):
        assert abs(a.touchdown - b.touchdown) <= 1
        assert abs(a.liftoff - b.liftoff) <= 1
        assert abs(a.next_touchdown - b.next_touchdown) <= 1


def test_same_seed_same_bytes_and_different_seed_differs():
    a = write_session(generate_session(SynthConfig(seed=5), 1, 2).to_session_file())
    b = write_session(generate_session(SynthConfig(seed=5), 1, 2).to_session_file())
    c = write_session(generate_session(SynthConfig(seed=6), 1, 2).to_session_file())
    assert a == b
    assert a != c


def test_noise_stream_is_separate_from_style():
    a = generate_session(SynthConfig(noise=0.05), 0, 0)
    b = generate_session(SynthConfig(noise=0.0), 0, 0)
    assert [e for e in a.events] == [e for e in b.events]
    resid = a.imu["gyro_z"] - b.imu["gyro_z"]
    assert np.std(resid) == pytest.approx(0.05 * 200.0, rel=0.05)


def test_modes_are_separated_at_equal_phase():
    g = np.linspace(0.0, 100.0, 400, endpoint=False)
    sigma = SynthConfig().channel_noise()
    for s in (19.0, 30.0, 40.0):
        shapes = {m: channel_shapes(m, slope, g) for m, slope in (("LW", 0.0), ("SA", s), ("SD", -s))}
        for a, b in itertools.combinations(MODES, 2):
            d = np.sqrt(sum(((shapes[a][c] - shapes[b][c]) / sigma[c]) ** 2 for c in SAGITTAL))
            assert d.mean() > 5.0, (a, b, s, d.mean())
        # same slope argument for both stair modes as well
        sa, sd = channel_shapes("SA", s, g), channel_shapes("SD", s, g)
        d = np.sqrt(sum(((sa[c] - sd[c]) / sigma[c]) ** 2 for c in SAGITTAL))
        assert d.mean() > 5.0


def test_class_balance_lw_sd_sa():
    s = generate_session(SynthConfig(), 0, 0)
    counts = [int(np.sum(s.mode[s.in_stride] == k)) for k in range(3)]
    assert counts[0] > counts[2] > counts[1]
    modes = [m for m, _, _ in default_schedule(30.0)]
    assert modes == ["LW", "SA", "LW", "SD", "LW"]


def test_annotations_mark_transitions():
    s = generate_session(SynthConfig(), 0, 0)
    assert s.annotations[0] == "LW"
    marked = [i for i, a in enumerate(s.annotations) if a != "none"][1:]
    assert marked == s.change_indices
    assert [s.annotations[i] for i in marked] == ["SA", "LW", "SD", "LW"]
    assert all(i in {e.touchdown for e in s.events} for i in marked)


def test_stride_durations_within_cleaning_window():
    for s in generate_corpus(SynthConfig(n_subjects=3)):
        d = np.array([e.duration(200.0) for e in s.events])
        assert d.min() >= 0.8 and d.max() <= 1.4


@pytest.mark.parametrize(
    "schedule",
    [(), (("XX", 0.0, 2),), (("LW", 5.0, 2),), (("SA", -5.0, 2),), (("SD", 5.0, 2),), (("LW", 0.0, 0),)],
)
def test_invalid_schedule(schedule):
    with pytest.raises(InvalidConfigError):
        generate_session(SynthConfig(), schedule=schedule)


def test_invalid_config():
    with pytest.raises(InvalidConfigError):
        SynthConfig(stride_duration=(0.7, 1.2))
    with pytest.raises(InvalidConfigError):
        SynthConfig(noise=-1.0)
    with pytest.raises(InvalidConfigError):
        SynthConfig(n_subjects=0)
    with pytest.raises(InvalidConfigError):
        generate_session(SynthConfig(), session=3)


def test_mixed_slope_schedule_cannot_be_a_single_file():
    s = generate_session(SynthConfig(), schedule=(("SA", 19.0, 2), ("SD", -30.0, 2)))
    assert np.isnan(s.stair_slope)
    with pytest.raises(InvalidConfigError):
        s.to_session_file()


def test_split_counts():
    assert split_counts(12) == (9, 2, 1)
    assert split_counts(3) == (1, 1, 1)
    assert split_counts(24) == (18, 4, 2)
    with pytest.raises(InvalidSplitError):
        split_counts(2)


def test_split_by_subject_canonical():
    names = [f"S{i:02d}" for i in range(1, 13) for _ in range(3)]
    train, val, test = split_by_subject(names)
    assert sorted(set(train)) == [f"S{i:02d}" for i in range(1, 10)]
    assert sorted(set(val)) == ["S10", "S11"] and set(test) == {"S12"}
    assert len(train) == 27


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 40), seed=st.one_of(st.none(), st.integers(0, 1000)))
def test_split_disjoint_property(n, seed):
    subjects = [f"P{i}" for i in range(n)]
    train, val, test = split_by_subject(subjects, seed=seed)
    assert set(train) | set(val) | set(test) == set(subjects)
    assert not (set(train) & set(val) or set(train) & set(test) or set(val) & set(test))
    assert (len(train), len(val), len(test)) == split_counts(n)
