"""Rule-based head-nod detection from pitch and yaw head-pose series.

A nod is a down-up excursion of pitch: a prominent pitch minimum whose
flanks rise by at least a noise-derived amplitude floor, that lasts a
plausible time, and during which pitch motion dominates yaw motion.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .data_model import BehaviorTrack, FrameSeries, Instance, ValidationError
from .events_agreement import instances_to_frames, merge_instances
from .signal_core import (derivative, find_extrema, mad, moving_average,
                          stillness_mask)

SOURCE = "nod_detector"


@dataclass(frozen=True)
class NodParams:
    smooth_window_s: float = 0.25
    k_mad: float = 3.0
    amplitude_coeff: float = 2.0
    prominence_frac: float = 0.5
    min_duration_s: float = 0.2
    max_duration_s: float = 1.5
    dominance_ratio: float = 1.5
    merge_gap_s: float = 0.15
    pitch_down_is_negative: bool = True

    def __post_init__(self):
        errors = []
        for name in ("smooth_window_s", "k_mad", "amplitude_coeff", "prominence_frac",
                     "min_duration_s", "max_duration_s", "dominance_ratio"):
            if not getattr(self, name) > 0:
                errors.append(f"nod.{name} must be > 0")
        if self.merge_gap_s < 0:
            errors.append("nod.merge_gap_s must be >= 0")
        if not self.min_duration_s < self.max_duration_s:
            errors.append("nod.min_duration_s must be < nod.max_duration_s")
        if self.dominance_ratio < 1:
            errors.append("nod.dominance_ratio must be >= 1")
        if errors:
            raise ValidationError(errors)


@dataclass(frozen=True)
class Candidate:
    start_s: float
    end_s: float
    min_s: float
    drop: float
    rise: float
    pitch_range: float
    yaw_range: float
    status: str  # "accepted" or the rejection reason

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s

    @property
    def accepted(self) -> bool:
        return self.status == "accepted"


@dataclass(frozen=True)
class NodDetection:
    instances: list[Instance]
    track: BehaviorTrack
    candidates: list[Candidate] = field(default_factory=list)
    amplitude_floor: float = 0.0

    def diagnostics_csv(self) -> str:
        buf = io.StringIO()
        names = list(Candidate.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for c in self.candidates:
            row = asdict(c)
            w.writerow([row[k] if isinstance(row[k], str) else repr(float(row[k])) for k in names])
        return buf.getvalue()


def _fill_invalid(values: np.ndarray, valid: np.ndarray, t: np.ndarray) -> np.ndarray:
    if valid.all():
        return values
    return np.interp(t, t[valid], values[valid])


def _flank_edge(p, still, m, bound, step, floor):
    """Walk from minimum ``m`` toward ``bound`` and return the first frame
    where the head has moved away from the minimum, risen at least ``floor``
    and come to rest again.  Falls back to ``bound``."""
    moved = False
    i = m + step
    while i != bound + step:
        if not still[i]:
            moved = True
        elif moved and p[i] - p[m] >= floor:
            return i
        i += step
    return bound


def detect_nods(pitch: FrameSeries, yaw: FrameSeries, params: NodParams | None = None,
                participant_id: str | None = None) -> NodDetection:
    """Detect nods in one participant's head pose.

    Steps: smooth pitch, differentiate, mask still frames by a MAD rule,
    derive the amplitude floor from pitch variability on still frames,
    find prominence-filtered extrema, build a candidate around every
    minimum, gate candidates on duration / amplitude / pitch-over-yaw
    dominance, merge close survivors and rasterize them to frames.
    """
    params = params or NodParams()
    t = pitch.timestamps
    if t.size == 0:
        raise ValidationError("empty series")
    if yaw.timestamps.shape != t.shape or not np.array_equal(yaw.timestamps, t):
        raise ValidationError("pitch and yaw timestamps differ")
    pid = participant_id or pitch.participant_id
    valid = pitch.valid & yaw.valid

    def empty(floor=0.0, candidates=()):
        track = instances_to_frames([], t, participant_id=pid, behavior="nod",
                                    source=SOURCE, valid=valid)
        return NodDetection([], track, list(candidates), floor)

    if np.count_nonzero(valid) < 2:
        return empty()

    raw_p = _fill_invalid(pitch.values, valid, t)
    raw_y = _fill_invalid(yaw.values, valid, t)
    if not params.pitch_down_is_negative:
        raw_p = -raw_p
    w = params.smooth_window_s
    p = moving_average(raw_p, t, w)
    y = moving_average(raw_y, t, w)
    vel = derivative(p, t)
    still = stillness_mask(vel, params.k_mad)

    # Floor from the measured (unsmoothed) pitch: smoothing shrinks jitter,
    # and a floor that shrinks with it lets jitter swings pass as nods.
    if still[valid].any():
        floor = params.amplitude_coeff * float(np.std(raw_p[still & valid]))
    else:
        floor = params.amplitude_coeff * mad(raw_p[valid])

    ext = find_extrema(p, params.prominence_frac * floor)
    n = t.size
    candidates: list[Candidate] = []
    for j in np.flatnonzero(ext.kinds < 0):
        m = int(ext.indices[j])
        lb = int(ext.indices[j - 1]) if j > 0 else 0
        rb = int(ext.indices[j + 1]) if j + 1 < len(ext) else n - 1
        left = _flank_edge(p, still, m, lb, -1, floor) if m > 0 else 0
        right = _flank_edge(p, still, m, rb, 1, floor) if m < n - 1 else n - 1
        if left == m or right == m:
            continue
        drop = float(p[left] - p[m])
        rise = float(p[right] - p[m])
        seg = slice(left, right + 1)
        p_range = float(np.ptp(p[seg]))
        y_range = float(np.ptp(y[seg]))
        duration = float(t[right] - t[left])
        if duration < params.min_duration_s:
            status = "too_short"
        elif duration > params.max_duration_s:
            status = "too_long"
        elif min(drop, rise) < floor or p_range <= 0:
            status = "low_amplitude"
        elif p_range < params.dominance_ratio * y_range:
            status = "yaw_dominant"
        else:
            status = "accepted"
        candidates.append(Candidate(float(t[left]), float(t[right]), float(t[m]),
                                    drop, rise, p_range, y_range, status))

    accepted = [Instance(c.start_s, c.end_s, "nod") for c in candidates if c.accepted]
    instances = merge_instances(accepted, params.merge_gap_s, strict=True)
    track = instances_to_frames(instances, t, participant_id=pid, behavior="nod",
                                source=SOURCE, valid=valid)
    return NodDetection(instances, track, candidates, floor)
