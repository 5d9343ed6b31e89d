import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gazepriv.signal import (AllSamplesMissing, GazeSample, Recording, ScreenBounds, TargetEvent,
                             clamp_offscreen, data_loss_rate, forward_fill, forward_fill_indices,
                             preprocess)


def rec(x, y, **kw):
    return Recording.from_arrays(np.asarray(x, float), np.asarray(y, float), 1000.0, **kw)


def test_nan_in_either_channel_marks_sample_missing():
    r = rec([0.0, np.nan, 1.0], [0.0, 2.0, np.nan])
    assert r.valid.tolist() == [True, False, False]
    assert np.isnan(r.y[1]) and np.isnan(r.x[2])


def test_recording_rejects_inconsistent_columns():
    with pytest.raises(ValueError):
        Recording(np.arange(3.0), np.zeros(3), np.zeros(2), np.ones(3, bool), 1000.0)
    with pytest.raises(ValueError):
        Recording(np.arange(0.0), np.zeros(0), np.zeros(0), np.ones(0, bool), 1000.0)
    with pytest.raises(ValueError):
        rec([0, 0], [0, 0], targets=(TargetEvent(1.0, 0, 0, 0), TargetEvent(1.0, 0, 0, 1)))


def test_samples_roundtrip():
    r = rec([0.0, np.nan, 2.0], [1.0, 1.0, 1.0])
    back = Recording.from_samples(list(r.samples()), 1000.0)
    assert back.valid.tolist() == r.valid.tolist()
    s1 = list(r.samples())[1]
    assert s1.t == 1.0 and not s1.valid
    assert not GazeSample.missing(4.0).valid


def test_key_and_duration():
    r = rec(np.zeros(10), np.zeros(10), subject_id="7", session_id="2", task_tag="RAN")
    assert r.key == "S7_2_RAN"
    assert r.duration_ms == 10.0


def test_clamp_uses_closed_bounds():
    b = ScreenBounds()
    r = rec([b.x_max, b.x_max + 1e-9, 0.0], [0.0, 0.0, b.y_min])
    out = clamp_offscreen(r, b)
    assert out.valid.tolist() == [True, False, True]
    assert np.isnan(out.x[1]) and np.isnan(out.y[1])


def test_clamp_returns_same_object_when_nothing_changes():
    r = rec([0.0, 1.0], [0.0, 1.0])
    assert clamp_offscreen(r) is r


def test_forward_fill_prefix_uses_first_valid():
    r = rec([np.nan, np.nan, 3.0, np.nan, 5.0], [0, 0, 1, 0, 2])
    f = forward_fill(r)
    assert f.x.tolist() == [3.0, 3.0, 3.0, 3.0, 5.0]
    assert f.y.tolist() == [1.0, 1.0, 1.0, 1.0, 2.0]
    assert f.valid.all()


def test_forward_fill_all_missing_raises():
    with pytest.raises(AllSamplesMissing):
        forward_fill(rec([np.nan, np.nan], [np.nan, np.nan]))


def test_preprocess_clamps_before_filling():
    # the off-screen sample must be filled from the previous on-screen one
    r = rec([1.0, 99.0, 2.0], [0.0, 0.0, 0.0])
    assert preprocess(r).x.tolist() == [1.0, 1.0, 2.0]


def test_data_loss_rate():
    assert data_loss_rate(rec([0, np.nan, np.nan, 1], [0, 0, 0, 0])) == 0.5


@given(st.lists(st.booleans(), min_size=1, max_size=200).filter(any))
def test_forward_fill_indices_point_to_latest_valid(valid):
    valid = np.array(valid)
    idx = forward_fill_indices(valid)
    first = int(np.argmax(valid))
    for i, j in enumerate(idx):
        assert valid[j]
        if i < first:
            assert j == first
        else:
            assert j <= i and not valid[j + 1:i + 1].any()
