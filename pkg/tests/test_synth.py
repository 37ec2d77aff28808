import numpy as np
import pytest

from nvbehavior.data_model import ValidationError
from nvbehavior.synth import SynthSpec, cohort_labels, generate_cohort, generate_participant, stream

SMALL = SynthSpec(n_control=3, n_clinical=2, segment_s=10.0)


def same(a, b):
    assert a.participant_id == b.participant_id and a.label == b.label
    for x, y in zip(a.frames, b.frames):
        assert x.channel == y.channel
        assert np.array_equal(x.values, y.values, equal_nan=True)
    assert a.annotations == b.annotations and a.truth == b.truth


def test_deterministic():
    for a, b in zip(generate_cohort(SMALL, 5), generate_cohort(SMALL, 5)):
        same(a, b)


def test_seed_changes_data():
    a = generate_participant(SMALL, 1, "P01", 0).channel("pitch").values
    b = generate_participant(SMALL, 2, "P01", 0).channel("pitch").values
    assert not np.array_equal(a, b)


def test_participant_independent_of_cohort_size():
    big = SynthSpec(n_control=10, n_clinical=5, segment_s=10.0)
    p = generate_participant(SMALL, 3, "P02", 1)
    q = generate_participant(big, 3, "P02", 1)
    same(p, q)


def test_named_streams_are_independent():
    a = stream(0, "P01", "pitch").random(1000)
    b = stream(0, "P01", "yaw").random(1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1
    assert np.array_equal(a, stream(0, "P01", "pitch").random(1000))


def test_cohort_shape():
    labels = cohort_labels(SynthSpec(), 0)
    assert len(labels) == 32 and sum(l for _, l in labels) == 11
    p = generate_participant(SynthSpec(), 0, "P01", 0)
    t = p.frames[0].timestamps
    assert t[-1] == pytest.approx(120.0) and t.size == 3601
    assert len(p.segmentation.segments) == 6
    assert {a for a, b in p.annotations if b == "nod"} == {"A1", "A2", "A3"}


def test_planted_signals_follow_truth():
    spec = SynthSpec(segment_s=30.0)
    p = generate_participant(spec, 4, "P01", 0)
    t = p.frames[0].timestamps
    au12 = p.channel("au12_likelihood").values
    smiling = np.zeros(t.size, dtype=bool)
    for inst in p.truth["smile"]:
        smiling |= (t >= inst.start_s) & (t < inst.end_s)
    assert smiling.any()
    assert np.all(au12[smiling] >= spec.smile_boundary - 1e-12)
    assert np.all(au12[~smiling] < spec.smile_boundary + 1e-12)


def test_spec_validation():
    with pytest.raises(ValidationError):
        SynthSpec(smile_boundary=0.95)
    with pytest.raises((ValidationError, TypeError)):
        SynthSpec.from_mapping({"no_such_field": 1})
