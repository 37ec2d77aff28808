"""Shared domain types for frame-wise behavior signals, tracks and events.

All types are immutable once constructed: numpy arrays are copied and marked
read-only, so validated objects can be shared freely between workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

BEHAVIORS = ("nod", "smile", "gaze_off")
PARTS = ("picture", "liked_food", "disliked_food")
MODES = ("speaking", "listening")

DEFAULT_CONFIDENCE_FLOOR = 0.5


class Unit(str, Enum):
    RADIANS = "radians"
    DEGREES = "degrees"
    LIKELIHOOD = "likelihood"
    UNITLESS = "unitless"

    @classmethod
    def parse(cls, value: "str | Unit") -> "Unit":
        if isinstance(value, Unit):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown unit {value!r}") from None


class ValidationError(ValueError):
    """Raised when inputs violate a domain invariant.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors: Sequence[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _frozen(arr, dtype=float) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def check_timestamps(timestamps: np.ndarray, what: str = "timestamps") -> list[str]:
    errors = []
    if timestamps.ndim != 1:
        errors.append(f"{what}: expected a 1-D vector")
    elif not np.all(np.isfinite(timestamps)):
        errors.append(f"{what}: non-finite timestamps")
    elif timestamps.size > 1 and np.any(np.diff(timestamps) <= 0):
        errors.append(f"{what}: non-increasing timestamps")
    return errors


@dataclass(frozen=True)
class FrameSeries:
    """One scalar channel of one participant, sampled at ``timestamps`` (s).

    Angles given in degrees are converted to radians on construction, so the
    stored unit of an angle channel is always ``Unit.RADIANS``.  Frames whose
    value is not finite, or whose confidence is below ``confidence_floor``,
    are flagged invalid in ``valid``.
    """

    participant_id: str
    channel: str
    timestamps: np.ndarray
    values: np.ndarray
    unit: Unit = Unit.UNITLESS
    confidence: np.ndarray | None = None
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        unit = Unit.parse(self.unit)
        ts = _frozen(self.timestamps)
        vals = np.array(self.values, dtype=float, copy=True)
        errors = check_timestamps(ts, f"{self.channel}")
        if vals.shape != ts.shape:
            errors.append(
                f"{self.channel}: {vals.size} values for {ts.size} timestamps"
            )
        conf = None
        if self.confidence is not None:
            conf = _frozen(self.confidence)
            if conf.shape != ts.shape:
                errors.append(f"{self.channel}: confidence length mismatch")
        if errors:
            raise ValidationError(errors)

        if unit is Unit.DEGREES:
            vals = np.deg2rad(vals)
            unit = Unit.RADIANS
        if unit is Unit.LIKELIHOOD:
            finite = vals[np.isfinite(vals)]
            if finite.size and (finite.min() < 0.0 or finite.max() > 1.0):
                raise ValidationError(f"{self.channel}: likelihood out of range")

        if self.valid is None:
            valid = np.isfinite(vals)
            if conf is not None:
                valid &= np.nan_to_num(conf, nan=-1.0) >= self.confidence_floor
        else:
            valid = np.asarray(self.valid, dtype=bool) & np.isfinite(vals)
            if valid.shape != ts.shape:
                raise ValidationError(f"{self.channel}: valid mask length mismatch")
        vals.setflags(write=False)
        object.__setattr__(self, "unit", unit)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "valid", _frozen(valid, bool))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def with_values(self, values, channel: str | None = None, unit: Unit | None = None) -> "FrameSeries":
        """Same frames and validity, new values."""
        return FrameSeries(
            self.participant_id,
            channel or self.channel,
            self.timestamps,
            values,
            unit=self.unit if unit is None else unit,
            confidence=self.confidence,
            confidence_floor=self.confidence_floor,
            valid=self.valid,
        )


@dataclass(frozen=True)
class BehaviorTrack:
    """Binary per-frame presence of one behavior from one source."""

    participant_id: str
    behavior: str
    source: str
    timestamps: np.ndarray
    frames: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        ts = _frozen(self.timestamps)
        frames = np.asarray(self.frames)
        errors = check_timestamps(ts, f"{self.behavior}/{self.source}")
        if frames.shape != ts.shape:
            errors.append(
                f"{self.behavior}/{self.source}: {frames.size} frames for {ts.size} timestamps"
            )
        elif frames.size and not np.all((frames == 0) | (frames == 1)):
            errors.append(f"{self.behavior}/{self.source}: frame values must be 0 or 1")
        if self.behavior not in BEHAVIORS:
            errors.append(f"unknown behavior {self.behavior!r}")
        valid = np.ones(ts.shape, bool) if self.valid is None else np.asarray(self.valid, bool)
        if valid.shape != ts.shape:
            errors.append(f"{self.behavior}/{self.source}: valid mask length mismatch")
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "frames", _frozen(frames, np.int8))
        object.__setattr__(self, "valid", _frozen(valid, bool))

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def replace(self, **changes) -> "BehaviorTrack":
        kw = dict(
            participant_id=self.participant_id,
            behavior=self.behavior,
            source=self.source,
            timestamps=self.timestamps,
            frames=self.frames,
            valid=self.valid,
        )
        kw.update(changes)
        return BehaviorTrack(**kw)


@dataclass(frozen=True, order=True)
class Instance:
    """A contiguous behavior event ``[start_s, end_s)``."""

    start_s: float
    end_s: float
    behavior: str = field(default="nod", compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.start_s) and np.isfinite(self.end_s)):
            raise ValidationError("instance bounds must be finite")
        if self.end_s <= self.start_s:
            raise ValidationError(
                f"stop before start: [{self.start_s}, {self.end_s}]"
            )

    @property
    def duration(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class Segment:
    part: str
    mode: str
    start_s: float
    end_s: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.part, self.mode)


@dataclass(frozen=True)
class PartSegmentation:
    """The labeled interaction parts (topic x speaking/listening) of a session."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        errors = []
        seen = set()
        for s in segs:
            if s.part not in PARTS:
                errors.append(f"unknown part {s.part!r}")
            if s.mode not in MODES:
                errors.append(f"unknown mode {s.mode!r}")
            if not s.end_s > s.start_s:
                errors.append(f"segment {s.part}/{s.mode}: stop before start")
            if s.key in seen:
                errors.append(f"duplicate segment {s.part}/{s.mode}")
            seen.add(s.key)
        if len(segs) > len(PARTS) * len(MODES):
            errors.append("more than six segments")
        for a, b in zip(segs, segs[1:]):
            if b.start_s < a.start_s:
                errors.append("segments not sorted by start")
            elif b.start_s < a.end_s:
                errors.append(f"segments {a.part}/{a.mode} and {b.part}/{b.mode} overlap")
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "segments", segs)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def span(self) -> tuple[float, float]:
        return (self.segments[0].start_s, self.segments[-1].end_s) if self.segments else (0.0, 0.0)


@dataclass(frozen=True)
class ScreenGeometry:
    """Physical screen and camera layout, in millimeters.

    ``camera_offset_mm`` is the camera position relative to the screen's
    top-left corner (x right, y down).
    """

    screen_width_mm: float = 300.0
    screen_height_mm: float = 190.0
    resolution_px: tuple[int, int] = (1920, 1200)
    camera_offset_mm: tuple[float, float] = (150.0, -5.0)
    eye_to_screen_mm: float = 500.0

    def __post_init__(self):
        errors = []
        for name in ("screen_width_mm", "screen_height_mm", "eye_to_screen_mm"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be > 0")
        if len(self.resolution_px) != 2 or min(self.resolution_px) <= 0:
            errors.append("resolution_px must be two positive integers")
        if errors:
            raise ValidationError(errors)
        object.__setattr__(self, "resolution_px", tuple(int(v) for v in self.resolution_px))
        object.__setattr__(self, "camera_offset_mm", tuple(float(v) for v in self.camera_offset_mm))


@dataclass(frozen=True)
class AgreementReport:
    observed_agreement: float
    expected_agreement: float
    kappa: float
    confusion: np.ndarray  # [[n00, n01], [n10, n11]], rows = a, cols = b
    instance_agreement: float | None = None

    @property
    def n_frames(self) -> int:
        return int(self.confusion.sum())


@dataclass(frozen=True)
class Session:
    """A validated recording: channels share one timestamp vector."""

    participant_id: str
    timestamps: np.ndarray
    channels: Mapping[str, FrameSeries]
    segmentation: PartSegmentation
    tracks: tuple[BehaviorTrack, ...] = ()

    def channel(self, name: str) -> FrameSeries:
        try:
            return self.channels[name]
        except KeyError:
            raise KeyError(f"{self.participant_id}: missing channel {name!r}") from None


def validate_session(
    frame_series_set: Iterable[FrameSeries],
    segmentation: PartSegmentation,
    tracks: Iterable[BehaviorTrack] = (),
) -> Session:
    """Check cross-object invariants and assemble a :class:`Session`.

    Raises :class:`ValidationError` listing every problem found.
    """
    series = list(frame_series_set)
    tracks = list(tracks)
    errors: list[str] = []
    if not series:
        raise ValidationError("no frame series given")
    pids = {s.participant_id for s in series} | {t.participant_id for t in tracks}
    if len(pids) != 1:
        errors.append(f"inputs reference several participants: {sorted(pids)}")
    ref = series[0].timestamps
    for s in series:
        if s.timestamps.shape != ref.shape:
            errors.append(f"{s.channel}: mismatched lengths ({s.timestamps.size} vs {ref.size})")
        elif not np.array_equal(s.timestamps, ref):
            errors.append(f"{s.channel}: timestamps differ from {series[0].channel}")
    names = [s.channel for s in series]
    if len(set(names)) != len(names):
        errors.append("duplicate channel names")
    for t in tracks:
        if t.timestamps.shape != ref.shape or not np.array_equal(t.timestamps, ref):
            errors.append(f"track {t.behavior}/{t.source}: not aligned to session timestamps")
    if len(segmentation) and ref.size:
        lo, hi = segmentation.span
        if lo < ref[0] or hi > ref[-1]:
            errors.append(
                f"segmentation [{lo}, {hi}] outside recording [{ref[0]}, {ref[-1]}]"
            )
    if errors:
        raise ValidationError(errors)
    return Session(
        participant_id=series[0].participant_id,
        timestamps=ref,
        channels={s.channel: s for s in series},
        segmentation=segmentation,
        tracks=tuple(tracks),
    )
