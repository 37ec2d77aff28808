import numpy as np
import pytest

from nvbehavior.data_model import (
    BehaviorTrack, FrameSeries, Instance, PartSegmentation, ScreenGeometry, Segment, Unit,
    ValidationError, validate_session,
)


def six_parts(t0=0.0, step=10.0):
    segs, t = [], t0
    for part in ("picture", "liked_food", "disliked_food"):
        for mode in ("speaking", "listening"):
            segs.append(Segment(part, mode, t, t + step))
            t += step
    return PartSegmentation(tuple(segs))


def test_valid_session_three_channels():
    t = np.arange(100) * 0.61
    series = [FrameSeries("p1", ch, t, np.sin(t + i), unit="radians")
              for i, ch in enumerate(("pitch", "yaw", "roll"))]
    s = validate_session(series, six_parts(0.0, 10.0))
    assert set(s.channels) == {"pitch", "yaw", "roll"}
    assert np.array_equal(s.timestamps, t)


def test_non_increasing_timestamps():
    with pytest.raises(ValidationError, match="non-increasing timestamps"):
        FrameSeries("p1", "pitch", [0.0, 0.0, 0.1], [1, 2, 3])


def test_likelihood_out_of_range():
    with pytest.raises(ValidationError, match="likelihood out of range"):
        FrameSeries("p1", "au12_likelihood", [0, 1, 2], [0.1, 1.2, 0.3], unit=Unit.LIKELIHOOD)


def test_degrees_canonicalized_to_radians():
    s = FrameSeries("p1", "pitch", [0, 1], [180.0, 90.0], unit="degrees")
    assert s.unit is Unit.RADIANS
    assert np.allclose(s.values, [np.pi, np.pi / 2])


def test_unknown_unit():
    with pytest.raises(ValueError, match="unknown unit"):
        FrameSeries("p1", "pitch", [0, 1], [0, 0], unit="furlongs")


def test_confidence_floor_and_nan_mark_invalid():
    s = FrameSeries("p1", "pitch", [0, 1, 2, 3], [0.0, np.nan, 1.0, 2.0],
                    confidence=[0.9, 0.9, 0.4, 0.5])
    assert s.valid.tolist() == [True, False, False, True]


def test_types_are_immutable():
    s = FrameSeries("p1", "pitch", [0, 1], [0.0, 1.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_mismatched_lengths_reported():
    a = FrameSeries("p1", "pitch", [0, 1, 2], [0, 0, 0])
    b = FrameSeries("p1", "yaw", [0, 1], [0, 0])
    with pytest.raises(ValidationError, match="mismatched lengths"):
        validate_session([a, b], PartSegmentation(()))


def test_segmentation_outside_recording():
    a = FrameSeries("p1", "pitch", np.arange(10.0), np.zeros(10))
    seg = PartSegmentation((Segment("picture", "speaking", 0.0, 20.0),))
    with pytest.raises(ValidationError, match="outside recording"):
        validate_session([a], seg)


def test_all_errors_collected():
    a = FrameSeries("p1", "pitch", [0, 1, 2], [0, 0, 0])
    b = FrameSeries("p2", "yaw", [0, 1], [0, 0])
    with pytest.raises(ValidationError) as exc:
        validate_session([a, b], PartSegmentation(()))
    assert len(exc.value.errors) == 2


def test_track_values_binary():
    with pytest.raises(ValidationError):
        BehaviorTrack("p1", "nod", "x", [0, 1, 2], [0, 2, 1])
    with pytest.raises(ValidationError):
        BehaviorTrack("p1", "wave", "x", [0, 1], [0, 1])


def test_instance_invariants():
    assert Instance(1.0, 2.5).duration == 1.5
    with pytest.raises(ValueError, match="stop before start"):
        Instance(2.0, 2.0)


def test_segmentation_rules():
    with pytest.raises(ValidationError):
        PartSegmentation((Segment("picture", "speaking", 0, 5), Segment("picture", "listening", 4, 8)))
    with pytest.raises(ValidationError):
        PartSegmentation((Segment("lunch", "speaking", 0, 5),))
    with pytest.raises(ValidationError):
        PartSegmentation((Segment("picture", "listening", 5, 8), Segment("picture", "speaking", 0, 5)))


def test_screen_geometry_positive():
    with pytest.raises(ValidationError):
        ScreenGeometry(eye_to_screen_mm=0.0)
