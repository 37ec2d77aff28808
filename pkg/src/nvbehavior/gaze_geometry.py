"""Project gaze rays onto the screen plane and flag off-screen frames.

Coordinates are millimeters.  The camera sits in the screen plane (z = 0) at
``camera_offset_mm`` from the screen's top-left corner; x grows to the right,
y grows downward, and the eye is in front of the screen at z > 0.  Gaze
angles of (0, 0) point straight at the screen plane, i.e. at the point in
front of the eye.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import BehaviorTrack, ScreenGeometry

SOURCE = "gaze_geometry"


@dataclass(frozen=True)
class GazeFrame:
    gaze_angle_x: float
    gaze_angle_y: float
    eye_position_mm: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class GazeProjection:
    points_mm: np.ndarray  # (n, 2) screen coordinates, NaN where no hit
    points_px: np.ndarray  # (n, 2)
    margin_score: np.ndarray  # logistic of normalized signed distance
    signed_distance_mm: np.ndarray  # > 0 outside the tolerance rectangle
    track: BehaviorTrack
    no_intersection: np.ndarray  # bool


def signed_distance_to_rect(x, y, x0, y0, x1, y1) -> np.ndarray:
    """Signed distance from points to an axis-aligned rectangle.

    Negative inside (distance to the nearest edge), positive outside
    (Euclidean distance to the rectangle).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = np.maximum(x0 - x, x - x1)
    dy = np.maximum(y0 - y, y - y1)
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    inside = np.minimum(np.maximum(dx, dy), 0.0)
    return outside + inside


def gaze_to_screen(
    angles_x,
    angles_y,
    geom: ScreenGeometry,
    eye_positions=None,
    *,
    timestamps=None,
    valid=None,
    participant_id: str = "",
    tolerance_mm: float = 10.0,
    score_slope: float = 10.0,
    flip_x: bool = False,
    flip_y: bool = False,
) -> GazeProjection:
    """Intersect each gaze ray with the screen plane.

    ``eye_positions`` is an ``(n, 3)`` array in camera coordinates (mm); when
    omitted the eye sits on the camera axis at ``geom.eye_to_screen_mm``.
    A frame is off-screen when its hit point lies outside the screen
    rectangle grown by ``tolerance_mm``, or when the ray never reaches the
    plane (eye at or behind it).

    The margin score is ``logistic(score_slope * d / half_diagonal)`` with
    ``d`` the signed distance to the grown rectangle, so thresholding it at
    0.5 reproduces the geometric decision.
    """
    ax = np.atleast_1d(np.asarray(angles_x, dtype=float))
    ay = np.atleast_1d(np.asarray(angles_y, dtype=float))
    if ax.shape != ay.shape:
        raise ValueError("angle arrays differ in length")
    finite = np.isfinite(ax) & np.isfinite(ay)
    if np.any(np.abs(ax[finite]) >= np.pi / 2) or np.any(np.abs(ay[finite]) >= np.pi / 2):
        raise ValueError("gaze angles must satisfy |angle| < pi/2")
    if flip_x:
        ax = -ax
    if flip_y:
        ay = -ay
    n = ax.size
    if eye_positions is None:
        eye = np.zeros((n, 3))
        eye[:, 2] = geom.eye_to_screen_mm
    else:
        eye = np.asarray(eye_positions, dtype=float).reshape(n, 3)

    ez = eye[:, 2]
    hits = finite & (ez > 0)
    with np.errstate(invalid="ignore"):
        hx = eye[:, 0] + ez * np.tan(ax)
        hy = eye[:, 1] + ez * np.tan(ay)
    cx, cy = geom.camera_offset_mm
    sx = np.where(hits, cx + hx, np.nan)
    sy = np.where(hits, cy + hy, np.nan)

    tol = tolerance_mm
    d = signed_distance_to_rect(sx, sy, -tol, -tol,
                                geom.screen_width_mm + tol, geom.screen_height_mm + tol)
    d = np.where(hits, d, np.inf)
    half_diag = 0.5 * np.hypot(geom.screen_width_mm, geom.screen_height_mm)
    with np.errstate(over="ignore"):
        score = 1.0 / (1.0 + np.exp(-score_slope * d / half_diag))
    off = (d > 0).astype(np.int8)

    px = np.column_stack((sx * geom.resolution_px[0] / geom.screen_width_mm,
                          sy * geom.resolution_px[1] / geom.screen_height_mm))
    if timestamps is None:
        timestamps = np.arange(n, dtype=float)
    frame_valid = finite if valid is None else np.asarray(valid, bool) & finite
    track = BehaviorTrack(participant_id, "gaze_off", SOURCE, timestamps, off, frame_valid)
    return GazeProjection(np.column_stack((sx, sy)), px, score, d, track, ~hits & finite)


def project_frames(frames: list[GazeFrame], geom: ScreenGeometry, **kwargs) -> GazeProjection:
    """:func:`gaze_to_screen` over a list of :class:`GazeFrame`."""
    ax = [f.gaze_angle_x for f in frames]
    ay = [f.gaze_angle_y for f in frames]
    eyes = None
    if any(f.eye_position_mm is not None for f in frames):
        default = (0.0, 0.0, geom.eye_to_screen_mm)
        eyes = [f.eye_position_mm if f.eye_position_mm is not None else default for f in frames]
    return gaze_to_screen(ax, ay, geom, eyes, **kwargs)
