"""Percent-of-time behavior measures per interaction part and mode."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data_model import BehaviorTrack, PartSegmentation
from .events_agreement import median_period, runs

ALL = "all"
LONG_COLUMNS = ("participant", "behavior", "source", "part", "mode",
                "percentage", "instance_count", "valid_duration_s")


@dataclass(frozen=True)
class PercentRow:
    participant: str
    behavior: str
    source: str
    part: str
    mode: str
    percentage: float  # NaN when the segment has no valid frames
    instance_count: int
    valid_duration_s: float

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in LONG_COLUMNS)


def frame_durations(timestamps) -> np.ndarray:
    """Gap to the next frame; the last frame gets the median period."""
    t = np.asarray(timestamps, dtype=float)
    if t.size == 0:
        return t.copy()
    d = np.empty_like(t)
    d[:-1] = np.diff(t)
    d[-1] = median_period(t) if t.size > 1 else 0.0
    return d


def percent_time(track: BehaviorTrack, segmentation: PartSegmentation,
                 mask=None) -> list[PercentRow]:
    """Duration-weighted percentage of valid time the behavior is present.

    One row per segment, then roll-ups per part (both modes), per mode (all
    parts) and overall, with ``"all"`` in the pooled column(s).  Frames are
    assigned to the segment containing their timestamp (``[start, stop)``).
    ``mask`` optionally restricts the valid frames further (e.g. to
    annotator consensus).  Segments without valid frames get NaN.
    """
    t = track.timestamps
    dur = frame_durations(t)
    valid = track.valid.copy()
    if mask is not None:
        valid &= np.asarray(mask, dtype=bool)
    on = (track.frames == 1) & valid
    onset = np.zeros(t.size, dtype=bool)
    for first, _ in runs(on):
        onset[first] = True

    seg_masks = {}
    for seg in segmentation:
        seg_masks[seg.key] = (t >= seg.start_s) & (t < seg.end_s)

    def row(part, mode, in_seg):
        vd = float(dur[in_seg & valid].sum())
        od = float(dur[in_seg & on].sum())
        # subset and superset sums round independently; keep the ratio in range
        pct = min(100.0, 100.0 * od / vd) if vd > 0 else math.nan
        return PercentRow(track.participant_id, track.behavior, track.source, part, mode,
                          pct, int(np.count_nonzero(in_seg & onset)), vd)

    rows = [row(seg.part, seg.mode, seg_masks[seg.key]) for seg in segmentation]
    empty = np.zeros(t.size, dtype=bool)
    parts = list(dict.fromkeys(seg.part for seg in segmentation))
    modes = list(dict.fromkeys(seg.mode for seg in segmentation))
    for part in parts:
        m = empty.copy()
        for k, v in seg_masks.items():
            if k[0] == part:
                m |= v
        rows.append(row(part, ALL, m))
    for mode in modes:
        m = empty.copy()
        for k, v in seg_masks.items():
            if k[1] == mode:
                m |= v
        rows.append(row(ALL, mode, m))
    m = empty.copy()
    for v in seg_masks.values():
        m |= v
    rows.append(row(ALL, ALL, m))
    return rows
