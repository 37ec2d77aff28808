import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvbehavior.data_model import ScreenGeometry
from nvbehavior.gaze_geometry import GazeFrame, gaze_to_screen, project_frames, signed_distance_to_rect

TOP_CENTRE = ScreenGeometry(300.0, 190.0, (1920, 1200), (150.0, 0.0), 500.0)
angle = st.floats(-1.5, 1.5)


def test_straight_ahead_hits_camera_point():
    pr = gaze_to_screen([0.0], [0.0], TOP_CENTRE)
    assert pr.points_mm[0].tolist() == [150.0, 0.0]
    assert pr.points_px[0].tolist() == [960.0, 0.0]
    assert pr.track.frames[0] == 0


def test_sixty_degrees_is_off_screen():
    pr = gaze_to_screen([np.deg2rad(60)], [np.deg2rad(10)], TOP_CENTRE)
    # independent right-triangle computation
    assert pr.points_mm[0, 0] - 150.0 == pytest.approx(500 * np.sqrt(3))
    assert pr.track.frames[0] == 1
    assert pr.margin_score[0] > 0.5


def test_backwards_angle_rejected():
    with pytest.raises(ValueError):
        gaze_to_screen([np.pi / 2], [0.0], TOP_CENTRE)
    with pytest.raises(ValueError):
        gaze_to_screen([0.0], [-2.0], TOP_CENTRE)


def test_eye_behind_plane_has_no_intersection():
    pr = project_frames([GazeFrame(0.0, 0.0, (0.0, 0.0, -10.0)), GazeFrame(0.0, 0.3)], TOP_CENTRE)
    assert pr.no_intersection.tolist() == [True, False]
    assert pr.track.frames.tolist()[0] == 1


def test_tolerance_margin():
    # just below the bottom edge: inside the 10 mm tolerance band
    y = np.arctan(195.0 / 500.0)
    assert gaze_to_screen([0.0], [y], TOP_CENTRE).track.frames[0] == 0
    y = np.arctan(205.0 / 500.0)
    assert gaze_to_screen([0.0], [y], TOP_CENTRE).track.frames[0] == 1


@given(angle, angle)
def test_margin_score_threshold_matches_geometry(ax, ay):
    pr = gaze_to_screen([ax], [ay], TOP_CENTRE)
    d = pr.signed_distance_mm[0]
    if abs(d) > 1e-9:
        assert (pr.margin_score[0] > 0.5) == bool(pr.track.frames[0])


@given(angle, angle)
def test_mirror_symmetry(ax, ay):
    a = gaze_to_screen([ax], [ay], TOP_CENTRE).points_mm[0]
    b = gaze_to_screen([-ax], [ay], TOP_CENTRE).points_mm[0]
    assert b[0] - 150.0 == pytest.approx(-(a[0] - 150.0), abs=1e-9)
    assert b[1] == pytest.approx(a[1])


@given(st.floats(0.0, 1.4), st.floats(0.001, 0.1), angle)
def test_monotone_in_horizontal_angle(ax, step, ay):
    near = gaze_to_screen([ax], [ay], TOP_CENTRE).points_mm[0, 0]
    far = gaze_to_screen([min(ax + step, 1.5)], [ay], TOP_CENTRE).points_mm[0, 0]
    assert abs(far - 150.0) > abs(near - 150.0)


@given(angle, angle, st.floats(0, 200), st.floats(0, 200))
def test_enlarging_screen_never_turns_on_to_off(ax, ay, dw, dh):
    small = gaze_to_screen([ax], [ay], TOP_CENTRE).track.frames[0]
    big = ScreenGeometry(300.0 + dw, 190.0 + dh, (1920, 1200), (150.0, 0.0), 500.0)
    if small == 0:
        assert gaze_to_screen([ax], [ay], big).track.frames[0] == 0


def test_signed_distance_examples():
    d = signed_distance_to_rect([5, 15, 13], [5, 5, 14], 0, 0, 10, 10)
    assert d.tolist() == pytest.approx([-5.0, 5.0, 5.0])


def test_flip_and_invalid_frames():
    pr = gaze_to_screen([0.2, np.nan], [0.0, 0.0], TOP_CENTRE, flip_x=True)
    assert pr.points_mm[0, 0] < 150.0
    assert pr.track.valid.tolist() == [True, False]
