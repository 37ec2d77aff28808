import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from nvbehavior.data_model import BehaviorTrack, Instance, ValidationError
from nvbehavior.events_agreement import (
    consensus_mask, frame_kappa, frames_to_instances, instance_agreement, instances_to_frames,
    majority_vote,
)

T30 = np.arange(300) / 30.0


def track(frames, t=None, source="a", valid=None):
    frames = np.asarray(frames, dtype=np.int8)
    t = np.arange(frames.size) / 30.0 if t is None else t
    return BehaviorTrack("p", "nod", source, t, frames, valid)


def hand_kappa(a, b):
    a, b = np.asarray(a), np.asarray(b)
    n = a.size
    n11 = np.sum((a == 1) & (b == 1))
    n00 = np.sum((a == 0) & (b == 0))
    po = (n11 + n00) / n
    pe = (a.sum() / n) * (b.sum() / n) + (1 - a.sum() / n) * (1 - b.sum() / n)
    if pe == 1:
        return 1.0 if po == 1 else 0.0
    return (po - pe) / (1 - pe)


binary = arrays(np.int8, st.integers(1, 60), elements=st.integers(0, 1))


# -- frames <-> instances ------------------------------------------------------

def test_all_zero_track_no_instances():
    assert frames_to_instances(track(np.zeros(50))) == []


def test_runs_merge_across_small_gap():
    f = np.zeros(60, dtype=int)
    f[10:21] = 1
    f[22:31] = 1
    inst = frames_to_instances(track(f))
    assert len(inst) == 1
    assert inst[0].start_s == pytest.approx(10 / 30) and inst[0].end_s == pytest.approx(31 / 30)


def test_single_frame_dropped():
    f = np.zeros(60, dtype=int)
    f[5] = 1
    assert frames_to_instances(track(f)) == []


def test_instances_to_frames_examples():
    assert instances_to_frames([], T30).frames.sum() == 0
    full = instances_to_frames([Instance(0.0, 10.0)], T30)
    assert full.frames.all()


@given(binary)
def test_round_trip_identity(f):
    tr = track(f)
    back = instances_to_frames(frames_to_instances(tr, 0.0, 0.0), tr.timestamps)
    assert np.array_equal(back.frames, tr.frames)


@given(binary)
def test_track_frames_inside_exactly_one_instance(f):
    tr = track(f)
    inst = frames_to_instances(tr, 0.15, 0.0)
    for i in np.flatnonzero(f):
        t = tr.timestamps[i]
        assert sum(1 for x in inst if x.start_s <= t < x.end_s) == 1


# -- majority / consensus --------------------------------------------------------

def test_majority_vote_examples():
    a, b, c = track([1, 1, 0]), track([1, 0, 0]), track([0, 0, 0])
    assert majority_vote([a, b, c], 2).frames.tolist() == [1, 0, 0]
    assert majority_vote([a, a, a], 2).frames.tolist() == [1, 1, 0]
    x, y, z = track([1, 1, 0, 1]), track([1, 0, 1, 1]), track([1, 1, 1, 0])
    assert majority_vote([x, y, z], 3).frames.tolist() == [1, 0, 0, 0]


def test_majority_vote_misaligned():
    with pytest.raises(ValidationError):
        majority_vote([track([1, 0]), track([1, 0, 1])], 2)


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(*[arrays(np.int8, n, elements=st.integers(0, 1))] * 3)))
def test_majority_two_of_three_is_median(fs):
    tracks = [track(f) for f in fs]
    assert np.array_equal(majority_vote(tracks, 2).frames, np.median(np.vstack(fs), axis=0))


def test_consensus_mask_examples():
    a = track([1, 0, 1, 0])
    assert consensus_mask(a, a).all()
    assert not consensus_mask(a, track([0, 1, 0, 1])).any()
    assert consensus_mask(a, track([1, 0, 0, 1])).tolist() == [True, True, False, False]


# -- kappa -------------------------------------------------------------------------

def test_kappa_examples():
    r = frame_kappa(track([1, 0, 1, 0]), track([1, 1, 0, 0]))
    assert (r.observed_agreement, r.expected_agreement, r.kappa) == (0.5, 0.5, 0.0)
    assert frame_kappa(track([1, 1, 0, 0]), track([0, 0, 1, 1])).kappa == -1.0
    assert frame_kappa(track([1, 0, 0, 1, 1]), track([1, 0, 0, 1, 1])).kappa == 1.0


def test_kappa_degenerate_and_errors():
    assert frame_kappa(track([1, 1, 1]), track([1, 1, 1])).kappa == 1.0
    with pytest.raises(ValidationError, match="no overlapping valid frames"):
        frame_kappa(track([1, 0], valid=[False, True]), track([1, 0], valid=[True, False]))


def test_kappa_excludes_invalid_frames():
    r = frame_kappa(track([1, 0, 1, 1], valid=[True, True, False, True]), track([1, 0, 0, 1]))
    assert r.n_frames == 3 and r.kappa == 1.0


@given(st.integers(1, 50).flatmap(lambda n: st.tuples(*[arrays(np.int8, n, elements=st.integers(0, 1))] * 2)))
def test_kappa_properties(ab):
    a, b = track(ab[0]), track(ab[1], source="b")
    r = frame_kappa(a, b)
    assert r.kappa == pytest.approx(hand_kappa(ab[0], ab[1]), abs=1e-12)
    assert r.kappa == pytest.approx(frame_kappa(b, a).kappa, abs=1e-12)
    flipped = frame_kappa(track(1 - ab[0]), track(1 - ab[1]))
    assert flipped.kappa == pytest.approx(r.kappa, abs=1e-12)
    assert r.kappa <= 1.0 and r.n_frames == len(ab[0])
    if r.expected_agreement < 1:
        assert (r.kappa == 1.0) == (r.observed_agreement == 1.0)


# -- instance agreement -------------------------------------------------------------

def test_instance_agreement_examples():
    a = [Instance(1, 2), Instance(3, 4), Instance(6, 7)]
    assert instance_agreement(a, a).dice_agreement == 1.0
    m = instance_agreement([Instance(1, 2)], [Instance(1.5, 2.5)])
    assert len(m.pairs) == 1 and m.dice_agreement == 1.0
    assert instance_agreement([Instance(1, 2)], [Instance(3, 4)]).dice_agreement == 0.0
    # touching is not overlapping
    assert instance_agreement([Instance(1, 2)], [Instance(2, 3)]).dice_agreement == 0.0


def intervals():
    return st.lists(st.tuples(st.floats(0, 50), st.floats(0.05, 3)), max_size=8).map(
        lambda xs: _disjoint(xs))


def _disjoint(xs):
    out, t = [], 0.0
    for gap, d in xs:
        s = t + gap
        out.append(Instance(s, s + d))
        t = s + d
    return out


@given(intervals(), intervals())
def test_dice_properties(a, b):
    m = instance_agreement(a, b)
    r = instance_agreement(b, a)
    assert 0.0 <= m.dice_agreement <= 1.0
    assert m.dice_agreement == pytest.approx(r.dice_agreement)
    used_a = [id(p[0]) for p in m.pairs]
    used_b = [id(p[1]) for p in m.pairs]
    assert len(set(used_a)) == len(used_a) and len(set(used_b)) == len(used_b)
    for x, y in m.pairs:
        assert min(x.end_s, y.end_s) > max(x.start_s, y.start_s)
    perfect = not m.unmatched_a and not m.unmatched_b
    assert (m.dice_agreement == 1.0) == perfect
