"""Readers and writers for frame, annotation, segmentation and participant files.

All files are delimited text with a header row; the delimiter (comma or tab)
is detected from the header and column names are matched case-insensitively.
Numbers are written with ``repr`` so a write/read round trip is bit-exact.
"""
from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULT_UNITS, RunConfig, load_config  # noqa: F401  (re-exported)
from .data_model import (
    BEHAVIORS, DEFAULT_CONFIDENCE_FLOOR, BehaviorTrack, FrameSeries, Instance,
    PartSegmentation, Segment, Session, Unit, ValidationError, validate_session,
)
from .events_agreement import merge_instances

TIMESTAMP = "timestamp"
CONFIDENCE = "confidence"
CONFIDENCE_SUFFIX = "_confidence"


def _read_text(source) -> tuple[str, str]:
    """(text, display name) for a path or an already-open text stream."""
    if hasattr(source, "read"):
        return source.read(), getattr(source, "name", "<stream>")
    with open(source, encoding="utf-8", newline="") as fh:
        return fh.read(), os.fspath(source)


def _rows(text: str, name: str) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header (lower-cased) and ``(line_number, cells)`` for each non-blank row."""
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise ValidationError(f"{name}: empty file")
    delim = "\t" if lines[0].count("\t") > lines[0].count(",") else ","
    reader = csv.reader(lines, delimiter=delim)
    header = [h.strip().lower() for h in next(reader)]
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not any(c.strip() for c in cells):
            continue
        rows.append((lineno, cells))
    if not rows:
        raise ValidationError(f"{name}: empty file")
    if len(set(header)) != len(header):
        raise ValidationError(f"{name}: duplicate column names")
    return header, rows


def _require(header: list[str], cols: Sequence[str], name: str) -> None:
    missing = [c for c in cols if c not in header]
    if missing:
        raise ValidationError(f"{name}: missing column(s) {', '.join(missing)}")


def _number(cell: str, lineno: int, col: str, errors: list[str], allow_missing: bool) -> float:
    s = cell.strip()
    if s == "" and allow_missing:
        return math.nan
    try:
        return float(s)
    except ValueError:
        errors.append(f"row {lineno}, column {col!r}: cannot parse {cell!r} as a number")
        return math.nan


def _cells(header, rows, name, errors):
    for lineno, cells in rows:
        if len(cells) != len(header):
            errors.append(f"row {lineno}: {len(cells)} fields, header has {len(header)}")
            continue
        yield lineno, dict(zip(header, cells))


# -- frames ------------------------------------------------------------------

def parse_frames(source, participant_id: str = "", units: Mapping[str, str] | None = None,
                 confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR) -> list[FrameSeries]:
    """One :class:`FrameSeries` per channel column.

    ``units`` maps column name to unit; unlisted columns are unitless.  A
    ``confidence`` column applies to every channel and ``<channel>_confidence``
    to one channel (both, if present, combine by minimum).  Empty cells and
    ``NaN`` mark the frame invalid for that channel.
    """
    text, name = _read_text(source)
    header, rows = _rows(text, name)
    _require(header, [TIMESTAMP], name)
    units = {k.lower(): v for k, v in (DEFAULT_UNITS if units is None else units).items()}
    errors: list[str] = []
    data = {h: [] for h in header}
    for lineno, rec in _cells(header, rows, name, errors):
        for col in header:
            n_err = len(errors)
            v = _number(rec[col], lineno, col, errors, allow_missing=col != TIMESTAMP)
            if col == TIMESTAMP and len(errors) == n_err and not math.isfinite(v):
                errors.append(f"row {lineno}, column {col!r}: timestamp must be finite")
            data[col].append(v)
    if errors:
        raise ValidationError([f"{name}: {e}" for e in errors])
    ts = np.array(data[TIMESTAMP])
    shared_conf = np.array(data[CONFIDENCE]) if CONFIDENCE in data else None
    channels = [h for h in header
                if h not in (TIMESTAMP, CONFIDENCE) and not h.endswith(CONFIDENCE_SUFFIX)]
    if not channels:
        raise ValidationError(f"{name}: no channel columns")
    out, problems = [], []
    for ch in channels:
        conf = shared_conf
        own = data.get(ch + CONFIDENCE_SUFFIX)
        if own is not None:
            own = np.array(own)
            conf = own if conf is None else np.fmin(conf, own)
        try:
            out.append(FrameSeries(participant_id, ch, ts, np.array(data[ch]),
                                   unit=Unit.parse(units.get(ch, "unitless")),
                                   confidence=conf, confidence_floor=confidence_floor))
        except (ValidationError, ValueError) as exc:
            problems.append(f"{name}: {exc}")
    if problems:
        raise ValidationError(problems)
    return out


def serialize_frames(series: Sequence[FrameSeries], delimiter: str = ",") -> str:
    """Inverse of :func:`parse_frames` (angle channels are written in radians)."""
    if not series:
        raise ValueError("nothing to serialize")
    ts = series[0].timestamps
    cols = [TIMESTAMP]
    columns = [ts]
    for s in series:
        if not np.array_equal(s.timestamps, ts):
            raise ValidationError(f"{s.channel}: timestamps differ")
        cols.append(s.channel)
        columns.append(s.values)
        if s.confidence is not None:
            cols.append(s.channel + CONFIDENCE_SUFFIX)
            columns.append(s.confidence)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(cols)
    for row in zip(*columns):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# -- annotations ---------------------------------------------------------------

AnnotationKey = tuple[str, str]  # (annotator, behavior)


def parse_annotations(source) -> dict[AnnotationKey, list[Instance]]:
    """Instances keyed ``(annotator, behavior)``; overlapping intervals merged."""
    text, name = _read_text(source)
    header, rows = _rows(text, name)
    _require(header, ["annotator", "behavior", "start", "stop"], name)
    errors: list[str] = []
    groups: dict[AnnotationKey, list[Instance]] = defaultdict(list)
    for lineno, rec in _cells(header, rows, name, errors):
        ann = rec["annotator"].strip()
        beh = rec["behavior"].strip().lower()
        n_err = len(errors)
        start = _number(rec["start"], lineno, "start", errors, allow_missing=False)
        stop = _number(rec["stop"], lineno, "stop", errors, allow_missing=False)
        if not ann:
            errors.append(f"row {lineno}, column 'annotator': empty annotator id")
        if beh not in BEHAVIORS:
            errors.append(f"row {lineno}, column 'behavior': unknown behavior {rec['behavior']!r}")
        if len(errors) > n_err:
            continue
        if not (math.isfinite(start) and math.isfinite(stop)):
            errors.append(f"row {lineno}: start/stop must be finite")
        elif stop <= start:
            errors.append(f"row {lineno}, column 'stop': stop before start ({stop!r} <= {start!r})")
        else:
            groups[(ann, beh)].append(Instance(start, stop, beh))
    if errors:
        raise ValidationError([f"{name}: {e}" for e in errors])
    return {k: merge_instances(groups[k]) for k in sorted(groups)}


def serialize_annotations(annotations: Mapping[AnnotationKey, Sequence[Instance]],
                          delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["annotator", "behavior", "start", "stop"])
    for (ann, beh) in sorted(annotations):
        for inst in annotations[(ann, beh)]:
            w.writerow([ann, beh, repr(float(inst.start_s)), repr(float(inst.end_s))])
    return buf.getvalue()


# -- segmentation ---------------------------------------------------------------

def parse_segmentation(source) -> PartSegmentation:
    text, name = _read_text(source)
    header, rows = _rows(text, name)
    _require(header, ["part", "mode", "start", "stop"], name)
    errors: list[str] = []
    segs = []
    for lineno, rec in _cells(header, rows, name, errors):
        n_err = len(errors)
        start = _number(rec["start"], lineno, "start", errors, allow_missing=False)
        stop = _number(rec["stop"], lineno, "stop", errors, allow_missing=False)
        if len(errors) > n_err:
            continue
        if not stop > start:
            errors.append(f"row {lineno}, column 'stop': stop before start")
            continue
        segs.append(Segment(rec["part"].strip().lower(), rec["mode"].strip().lower(), start, stop))
    if errors:
        raise ValidationError([f"{name}: {e}" for e in errors])
    segs.sort(key=lambda s: s.start_s)
    try:
        return PartSegmentation(tuple(segs))
    except (ValidationError, ValueError) as exc:
        raise ValidationError(f"{name}: {exc}") from None


def serialize_segmentation(seg: PartSegmentation, delimiter: str = ",") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["part", "mode", "start", "stop"])
    for s in seg:
        w.writerow([s.part, s.mode, repr(float(s.start_s)), repr(float(s.end_s))])
    return buf.getvalue()


# -- participants ----------------------------------------------------------------

def parse_participants(source) -> dict[str, int | None]:
    """``participant`` column plus an optional 0/1 ``label`` column (blank = unknown)."""
    text, name = _read_text(source)
    header, rows = _rows(text, name)
    _require(header, ["participant"], name)
    errors: list[str] = []
    out: dict[str, int | None] = {}
    for lineno, rec in _cells(header, rows, name, errors):
        pid = rec["participant"].strip()
        raw = rec.get("label", "").strip()
        if not pid:
            errors.append(f"row {lineno}, column 'participant': empty id")
            continue
        if pid in out:
            errors.append(f"row {lineno}, column 'participant': duplicate id {pid!r}")
            continue
        if raw in ("", "na", "NA"):
            out[pid] = None
        elif raw in ("0", "1"):
            out[pid] = int(raw)
        else:
            errors.append(f"row {lineno}, column 'label': expected 0, 1 or blank, got {raw!r}")
    if errors:
        raise ValidationError([f"{name}: {e}" for e in errors])
    return out


# -- session bundles ---------------------------------------------------------------

FRAMES_FILE = "frames.csv"
SEGMENTS_FILE = "segments.csv"
ANNOTATIONS_FILE = "annotations.csv"
PARTICIPANTS_FILE = "participants.csv"


@dataclass(frozen=True)
class SessionBundle:
    session: Session
    annotations: Mapping[AnnotationKey, Sequence[Instance]]
    label: int | None = None


def load_session(directory, participant_id: str, config: RunConfig | None = None,
                 label: int | None = None) -> SessionBundle:
    """Read ``frames.csv``, ``segments.csv`` and (optional) ``annotations.csv``."""
    config = config or RunConfig()
    frames = parse_frames(os.path.join(directory, FRAMES_FILE), participant_id,
                          config.units, config.confidence_floor)
    seg = parse_segmentation(os.path.join(directory, SEGMENTS_FILE))
    ann_path = os.path.join(directory, ANNOTATIONS_FILE)
    annotations = parse_annotations(ann_path) if os.path.exists(ann_path) else {}
    return SessionBundle(validate_session(frames, seg), annotations, label)


def annotation_tracks(bundle: SessionBundle, behavior: str) -> list[BehaviorTrack]:
    """Frame tracks of every annotator who coded ``behavior``, sorted by annotator."""
    from .events_agreement import instances_to_frames
    s = bundle.session
    valid = np.ones(s.timestamps.size, dtype=bool)
    return [instances_to_frames(inst, s.timestamps, participant_id=s.participant_id,
                                behavior=behavior, source=ann, valid=valid)
            for (ann, beh), inst in sorted(bundle.annotations.items()) if beh == behavior]
