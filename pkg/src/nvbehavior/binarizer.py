"""Thresholding of likelihood channels and kappa-driven threshold calibration."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import BehaviorTrack, FrameSeries, Unit, ValidationError
from .events_agreement import confusion_matrix, kappa_from_confusion

# 0.1 .. 0.9 written as exact decimal literals (i / 10 is correctly rounded).
DEFAULT_THRESHOLDS = tuple(i / 10 for i in range(1, 10))


def binarize(series: FrameSeries, threshold: float, *, behavior: str = "smile",
             source: str | None = None, polarity: str = "presence") -> BehaviorTrack:
    """1 where ``value >= threshold``.

    With ``polarity="contact"`` the channel measures eye contact and the
    returned track marks its absence (``gaze_off = 1 - contact``).
    """
    if series.unit is not Unit.LIKELIHOOD:
        raise ValidationError(f"{series.channel}: binarize needs a likelihood channel, got {series.unit.value}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if polarity not in ("presence", "contact"):
        raise ValueError(f"unknown polarity {polarity!r}")
    with np.errstate(invalid="ignore"):
        hit = series.values >= threshold
    frames = (~hit if polarity == "contact" else hit).astype(np.int8)
    frames[~series.valid] = 0
    return BehaviorTrack(series.participant_id, behavior, source or series.channel,
                         series.timestamps, frames, series.valid)


@dataclass(frozen=True)
class ThresholdSweepResult:
    thresholds: tuple[float, ...]
    kappa_per_annotator: np.ndarray  # (n_thresholds, n_annotators)
    mean_kappa: np.ndarray
    best_threshold: float
    best_mean_kappa: float
    annotators: tuple[str, ...] = ()

    def to_csv(self) -> str:
        """One row per (threshold, annotator)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "annotator", "kappa", "mean_kappa"])
        names = self.annotators or tuple(str(i) for i in range(self.kappa_per_annotator.shape[1]))
        for i, thr in enumerate(self.thresholds):
            for j, name in enumerate(names):
                w.writerow([repr(thr), name, repr(float(self.kappa_per_annotator[i, j])),
                            repr(float(self.mean_kappa[i]))])
        return buf.getvalue()


def _stack(parts: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(p) for p in parts]) if parts else np.empty(0)


def sweep_thresholds(
    series: FrameSeries | Sequence[FrameSeries],
    annotator_tracks: Sequence[BehaviorTrack] | Sequence[Sequence[BehaviorTrack]],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    *,
    polarity: str = "presence",
    pooled: bool = False,
) -> ThresholdSweepResult:
    """Pick the threshold maximizing mean frame-level kappa over annotators.

    ``series`` may be a list of per-participant series; then
    ``annotator_tracks[k]`` is the list of annotator tracks for participant
    ``k`` and frames from all participants are pooled into one confusion
    matrix per annotator, giving one global threshold.  Annotators are
    matched across participants by ``source``.

    With ``pooled=True`` every annotator's frames are stacked into a single
    comparison instead of averaging per-annotator kappas.  Ties go to the
    lower threshold.
    """
    if isinstance(series, FrameSeries):
        series = [series]
        annotator_tracks = [annotator_tracks]  # type: ignore[list-item]
    if len(series) != len(annotator_tracks):
        raise ValueError("one list of annotator tracks per series expected")
    thresholds = tuple(sorted(float(t) for t in thresholds))
    if not thresholds:
        raise ValueError("empty threshold grid")

    names: list[str] = []
    for tracks in annotator_tracks:
        for tr in tracks:
            if tr.source not in names:
                names.append(tr.source)
    if not names:
        raise ValidationError("no annotator tracks")

    # Per annotator: concatenated (values, labels, mask) across participants.
    per_ann: dict[str, list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {n: [] for n in names}
    for s, tracks in zip(series, annotator_tracks):
        for tr in tracks:
            if tr.timestamps.shape != s.timestamps.shape or not np.array_equal(tr.timestamps, s.timestamps):
                raise ValidationError(f"{s.participant_id}: annotator {tr.source} not aligned to {s.channel}")
            per_ann[tr.source].append((s.values, tr.frames == 1, s.valid & tr.valid))
    data = {}
    for name, chunks in per_ann.items():
        vals = _stack([c[0] for c in chunks])
        labels = _stack([c[1] for c in chunks]).astype(bool)
        mask = _stack([c[2] for c in chunks]).astype(bool)
        data[name] = (vals[mask], labels[mask])
    if all(d[0].size == 0 for d in data.values()):
        raise ValidationError("no overlapping valid frames")

    if pooled:
        vals = _stack([d[0] for d in data.values()])
        labels = _stack([d[1] for d in data.values()]).astype(bool)
        data = {"pooled": (vals, labels)}
        names = ["pooled"]

    kappas = np.empty((len(thresholds), len(names)))
    for i, thr in enumerate(thresholds):
        for j, name in enumerate(names):
            vals, labels = data[name]
            pred = vals >= thr
            if polarity == "contact":
                pred = ~pred
            kappas[i, j] = kappa_from_confusion(confusion_matrix(pred, labels))[2]
    mean = kappas.mean(axis=1)
    best = int(np.argmax(mean))  # first maximum = lowest threshold on ties
    return ThresholdSweepResult(thresholds, kappas, mean, thresholds[best],
                                float(mean[best]), tuple(names))
