import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvbehavior.aggregate import ALL, frame_durations, percent_time
from nvbehavior.data_model import BehaviorTrack, PartSegmentation, Segment

SIX = PartSegmentation(tuple(
    Segment(part, mode, 20.0 * i + 10.0 * j, 20.0 * i + 10.0 * (j + 1))
    for i, part in enumerate(("picture", "liked_food", "disliked_food"))
    for j, mode in enumerate(("speaking", "listening"))))


def track(frames, t, valid=None):
    return BehaviorTrack("p", "smile", "au12", t, np.asarray(frames, dtype=np.int8), valid)


def by_key(rows):
    return {(r.part, r.mode): r for r in rows}


def test_all_one_track():
    t = np.arange(0, 60, 1 / 30)
    rows = percent_time(track(np.ones(t.size), t), SIX)
    assert all(r.percentage == pytest.approx(100.0) for r in rows)
    assert len(rows) == 6 + 3 + 2 + 1


def test_uniform_count_ratio():
    t = np.arange(300) / 30.0
    seg = PartSegmentation((Segment("picture", "speaking", 0.0, 10.0),))
    f = np.zeros(300)
    f[100:130] = 1
    r = by_key(percent_time(track(f, t), seg))[("picture", "speaking")]
    assert r.percentage == pytest.approx(10.0)
    assert r.instance_count == 1


def test_duration_weighted():
    t = np.array([0.0, 1.0, 2.0, 4.0])
    # durations 1, 1, 2, and the last frame sits outside the segment
    seg = PartSegmentation((Segment("picture", "speaking", 0.0, 4.0),))
    assert frame_durations(t).tolist() == [1.0, 1.0, 2.0, 1.0]
    r = by_key(percent_time(track([1, 0, 1, 0], t), seg))[("picture", "speaking")]
    assert r.percentage == pytest.approx(75.0)
    assert r.valid_duration_s == 4.0


def test_segment_without_valid_frames_is_missing():
    t = np.arange(0, 60, 1 / 30)
    valid = t >= 10.0
    rows = by_key(percent_time(track(np.ones(t.size), t, valid), SIX))
    assert math.isnan(rows[("picture", "speaking")].percentage)
    assert rows[("picture", ALL)].percentage == pytest.approx(100.0)


def test_consensus_mask_restricts_frames():
    t = np.arange(0, 60, 1 / 30)
    f = (t % 2 < 1).astype(int)
    rows = by_key(percent_time(track(f, t), SIX, mask=f == 1))
    assert rows[(ALL, ALL)].percentage == pytest.approx(100.0)


@st.composite
def random_case(draw):
    n = draw(st.integers(20, 200))
    gaps = np.array(draw(st.lists(st.floats(0.01, 0.2), min_size=n, max_size=n)))
    t = np.concatenate(([0.0], np.cumsum(gaps)))[:n] * (59.0 / gaps.sum())
    frames = np.array(draw(st.lists(st.integers(0, 1), min_size=n, max_size=n)))
    valid = np.array(draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    return t, frames, valid


@given(random_case())
def test_properties(case):
    t, f, valid = case
    rows = percent_time(track(f, t, valid), SIX)
    inv = percent_time(track(1 - f, t, valid), SIX)
    for r, s in zip(rows, inv):
        if math.isnan(r.percentage):
            assert math.isnan(s.percentage)
            continue
        assert 0.0 <= r.percentage <= 100.0
        assert s.percentage == pytest.approx(100.0 - r.percentage, abs=1e-9)
    segs = [r for r in rows if r.part != ALL and r.mode != ALL and not math.isnan(r.percentage)]
    overall = by_key(rows)[(ALL, ALL)]
    if segs:
        w = np.array([r.valid_duration_s for r in segs])
        p = np.array([r.percentage for r in segs])
        assert overall.percentage == pytest.approx(float(np.sum(w * p) / w.sum()), abs=1e-9)
