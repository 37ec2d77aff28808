"""Seeded synthetic cohorts with planted behaviors and ground truth.

Every random draw comes from a named sub-stream derived from the cohort
seed, the participant id and a channel name, so a participant's data does not
depend on which other participants are generated or in what order.

Planted signals:

* pitch: raised-cosine down-up dips (nods) on a per-participant baseline plus
  white noise; yaw carries yaw-only oscillations (head shakes).
* au12_likelihood: uniform in ``[b, b + w/2)`` inside smiles and in
  ``[b - w/2, b)`` outside, with ``b`` the smile boundary and ``w`` the
  noise width; eye_contact_score likewise around its own boundary, low
  during gaze aversions.
* gaze angles point inside the screen during contact and well outside it
  during aversions.
* the clinical group (label 1) differs by ``group_effect`` standard units in
  head-pose baselines, AU4 level, smile rate and aversion rate.
"""
from __future__ import annotations

import dataclasses
import math
import os
import zlib
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import yaml

from .data_model import (
    MODES, PARTS, FrameSeries, Instance, PartSegmentation, Segment, Unit, ValidationError,
)
from . import ingest

DEFAULT_NOISE_SD = 0.003  # rad, ~0.17 deg of tracker jitter


@dataclass(frozen=True)
class SynthSpec:
    n_control: int = 21
    n_clinical: int = 11
    fps: float = 30.0
    segment_s: float = 20.0          # six segments -> 2 min per participant
    frame_jitter: float = 0.0        # relative jitter of frame periods
    invalid_frac: float = 0.0        # share of frames with low tracker confidence
    # head pose
    pitch_noise_sd: float = DEFAULT_NOISE_SD
    yaw_noise_sd: float = DEFAULT_NOISE_SD
    roll_noise_sd: float = DEFAULT_NOISE_SD
    amplitude_coeff: float = 2.0     # c of the detector floor the nods are scaled to
    nod_amplitude_factor: float = 3.0
    nod_amplitude_ref_sd: float | None = None  # None: pitch_noise_sd, or the default if 0
    nod_duration_s: tuple[float, float] = (0.4, 0.9)
    nods_per_min: float = 6.0
    listening_nod_factor: float = 2.0
    shakes_per_min: float = 1.0
    shake_duration_s: float = 1.5
    shake_amplitude: float = 0.15    # rad
    shake_freq_hz: float = 2.5
    baseline_sd: float = 0.05        # between-participant sd of pose baselines (rad)
    # likelihood channels
    smile_boundary: float = 0.65
    smile_noise_width: float = 0.3
    smiles_per_min: float = 4.0
    smile_duration_s: tuple[float, float] = (1.0, 4.0)
    contact_boundary: float = 0.2
    contact_noise_width: float = 0.3
    aversions_per_min: float = 4.0
    aversion_duration_s: tuple[float, float] = (0.5, 3.0)
    # annotators
    nod_annotators: int = 3
    other_annotators: int = 2
    boundary_jitter_s: float = 0.03
    miss_prob: float = 0.0
    # group difference in standard units (0 = null cohort)
    group_effect: float = 0.0

    def __post_init__(self):
        errors = []
        if self.n_control < 0 or self.n_clinical < 0 or self.n_control + self.n_clinical < 1:
            errors.append("synth: need at least one participant")
        for name in ("fps", "segment_s", "nod_amplitude_factor", "amplitude_coeff",
                     "shake_duration_s", "smile_noise_width", "contact_noise_width"):
            if not getattr(self, name) > 0:
                errors.append(f"synth.{name} must be > 0")
        for name in ("pitch_noise_sd", "yaw_noise_sd", "roll_noise_sd", "nods_per_min",
                     "shakes_per_min", "smiles_per_min", "aversions_per_min", "baseline_sd",
                     "boundary_jitter_s"):
            if getattr(self, name) < 0:
                errors.append(f"synth.{name} must be >= 0")
        if not 0 <= self.frame_jitter < 1:
            errors.append("synth.frame_jitter must lie in [0, 1)")
        if not 0 <= self.invalid_frac < 1 or not 0 <= self.miss_prob < 1:
            errors.append("synth.invalid_frac and synth.miss_prob must lie in [0, 1)")
        for b, w, name in ((self.smile_boundary, self.smile_noise_width, "smile"),
                           (self.contact_boundary, self.contact_noise_width, "contact")):
            if b - w / 2 < 0 or b + w / 2 > 1:
                errors.append(f"synth: {name} boundary +- width/2 must stay inside [0, 1]")
        for name in ("nod_duration_s", "smile_duration_s", "aversion_duration_s"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                errors.append(f"synth.{name} must be 0 < low <= high")
        if self.nod_annotators < 1 or self.other_annotators < 1:
            errors.append("synth: need at least one annotator per behavior")
        if errors:
            raise ValidationError(errors)

    @property
    def nod_amplitude(self) -> float:
        ref = self.nod_amplitude_ref_sd
        if ref is None:
            ref = self.pitch_noise_sd if self.pitch_noise_sd > 0 else DEFAULT_NOISE_SD
        return self.nod_amplitude_factor * self.amplitude_coeff * ref

    @classmethod
    def from_mapping(cls, data: Mapping | None) -> "SynthSpec":
        data = dict(data or {})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValidationError([f"synth.{k}: unknown key" for k in unknown])
        for k, v in data.items():
            if isinstance(v, list):
                data[k] = tuple(v)
        return cls(**data)


def stream(seed: int, *names: str) -> np.random.Generator:
    """Independent generator for a named sub-stream of ``seed``."""
    key = tuple(zlib.crc32(n.encode("utf-8")) for n in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass
class SynthParticipant:
    participant_id: str
    label: int
    frames: list[FrameSeries]
    segmentation: PartSegmentation
    annotations: dict[tuple[str, str], list[Instance]]
    truth: dict[str, list[Instance]]
    shakes: list[Instance] = field(default_factory=list)

    def channel(self, name: str) -> FrameSeries:
        for s in self.frames:
            if s.channel == name:
                return s
        raise KeyError(name)


def _timestamps(spec: SynthSpec, rng) -> np.ndarray:
    total = 6 * spec.segment_s
    n = int(round(total * spec.fps))
    period = np.full(n, 1.0 / spec.fps)
    if spec.frame_jitter > 0:
        period *= 1.0 + rng.uniform(-spec.frame_jitter, spec.frame_jitter, n)
        period *= total / period.sum()
    t = np.concatenate(([0.0], np.cumsum(period)))
    t[-1] = total
    return t


def _segmentation(spec: SynthSpec) -> PartSegmentation:
    segs, t = [], 0.0
    for part in PARTS:
        for mode in MODES:
            segs.append(Segment(part, mode, t, t + spec.segment_s))
            t += spec.segment_s
    return PartSegmentation(tuple(segs))


def _place(rng, n: int, duration, total: float, taken: list[tuple[float, float]],
           margin: float) -> list[tuple[float, float]]:
    """Up to ``n`` non-overlapping intervals avoiding ``taken`` (plus ``margin``)."""
    out = []
    lo_d, hi_d = duration
    for _ in range(n):
        for _try in range(50):
            d = rng.uniform(lo_d, hi_d)
            if total - d - 2 * margin < 0:
                continue
            s = rng.uniform(margin, total - d - margin)
            if all(s + d + margin <= a or s >= b + margin for a, b in taken):
                taken.append((s, s + d))
                out.append((s, s + d))
                break
    return sorted(out)


def _events_by_mode(rng, spec, segmentation, per_min, duration, taken, margin,
                    listening_factor=1.0):
    total = segmentation.span[1]
    out = []
    for seg in segmentation:
        rate = per_min * (listening_factor if seg.mode == "listening" else 1.0)
        n = rng.poisson(rate * (seg.end_s - seg.start_s) / 60.0)
        local = [(a - seg.start_s, b - seg.start_s) for a, b in taken
                 if b > seg.start_s and a < seg.end_s]
        placed = _place(rng, n, duration, seg.end_s - seg.start_s, local, margin)
        for a, b in placed:
            a, b = a + seg.start_s, b + seg.start_s
            if b <= total:
                taken.append((a, b))
                out.append((a, b))
    return sorted(out)


def _mask(t, intervals) -> np.ndarray:
    m = np.zeros(t.size, dtype=bool)
    for a, b in intervals:
        m |= (t >= a) & (t < b)
    return m


def _annotate(rng, truth: list[tuple[float, float]], spec: SynthSpec, total: float):
    out = []
    for a, b in truth:
        if spec.miss_prob and rng.random() < spec.miss_prob:
            continue
        j = spec.boundary_jitter_s
        a2 = max(0.0, a + rng.uniform(-j, j)) if j else a
        b2 = min(total, b + rng.uniform(-j, j)) if j else b
        if b2 > a2:
            out.append((round(a2, 3), round(b2, 3)))
    return out


def generate_participant(spec: SynthSpec, seed: int, participant_id: str, label: int) -> SynthParticipant:
    pid = participant_id
    rng_t = stream(seed, pid, "timestamps")
    t = _timestamps(spec, rng_t)
    n = t.size
    seg = _segmentation(spec)
    total = seg.span[1]
    effect = spec.group_effect if label == 1 else 0.0

    lat = stream(seed, pid, "latent")
    base = lat.normal(0.0, 1.0, 3) * spec.baseline_sd
    base[0] -= effect * spec.baseline_sd  # clinical: head lowered
    base[1] += 0.5 * effect * spec.baseline_sd
    smile_rate = spec.smiles_per_min * math.exp(lat.normal(0.0, 0.3) - 0.5 * effect)
    avert_rate = spec.aversions_per_min * math.exp(lat.normal(0.0, 0.3) + 0.5 * effect)
    au4_level = float(np.clip(0.2 + 0.05 * lat.normal() + 0.05 * effect, 0.02, 0.6))

    # head pose: shakes first, then nods avoiding them
    ev = stream(seed, pid, "events")
    taken: list[tuple[float, float]] = []
    shakes = _events_by_mode(ev, spec, seg, spec.shakes_per_min,
                             (spec.shake_duration_s, spec.shake_duration_s), taken, 1.0)
    nods = _events_by_mode(ev, spec, seg, spec.nods_per_min, spec.nod_duration_s, taken, 1.0,
                           spec.listening_nod_factor)

    pitch = np.full(n, base[0])
    amp = spec.nod_amplitude
    for a, b in nods:
        m = (t >= a) & (t <= b)
        pitch[m] -= amp * 0.5 * (1.0 - np.cos(2 * np.pi * (t[m] - a) / (b - a)))
    yaw = np.full(n, base[1])
    for a, b in shakes:
        m = (t >= a) & (t <= b)
        env = np.sin(np.pi * (t[m] - a) / (b - a))
        yaw[m] += spec.shake_amplitude * env * np.sin(2 * np.pi * spec.shake_freq_hz * (t[m] - a))
    roll = np.full(n, base[2])
    pitch += stream(seed, pid, "pitch").normal(0.0, 1.0, n) * spec.pitch_noise_sd
    yaw += stream(seed, pid, "yaw").normal(0.0, 1.0, n) * spec.yaw_noise_sd
    roll += stream(seed, pid, "roll").normal(0.0, 1.0, n) * spec.roll_noise_sd

    # smiles and AUs
    ev_s = stream(seed, pid, "smile_events")
    smiles = _events_by_mode(ev_s, spec, seg, smile_rate, spec.smile_duration_s, [], 0.5)
    smiling = _mask(t, smiles)
    rs = stream(seed, pid, "au12_likelihood")
    half = spec.smile_noise_width / 2
    au12 = np.where(smiling, rs.uniform(spec.smile_boundary, spec.smile_boundary + half, n),
                    rs.uniform(spec.smile_boundary - half, spec.smile_boundary, n))
    r6 = stream(seed, pid, "au06")
    au06 = np.where(smiling, r6.uniform(0.5, 0.9, n), r6.uniform(0.05, 0.4, n))
    r4 = stream(seed, pid, "au04")
    au04 = np.clip(au4_level + r4.uniform(-0.1, 0.1, n), 0.0, 1.0)

    # gaze
    ev_g = stream(seed, pid, "gaze_events")
    aversions = _events_by_mode(ev_g, spec, seg, avert_rate, spec.aversion_duration_s, [], 0.5)
    away = _mask(t, aversions)
    rc = stream(seed, pid, "eye_contact_score")
    half = spec.contact_noise_width / 2
    contact = np.where(away, rc.uniform(spec.contact_boundary - half, spec.contact_boundary, n),
                       rc.uniform(spec.contact_boundary, spec.contact_boundary + half, n))
    rg = stream(seed, pid, "gaze_angles")
    gx = rg.uniform(-0.2, 0.2, n)
    gy = rg.uniform(0.05, 0.3, n)
    side = np.where(rg.random(len(aversions)) < 0.5, -1.0, 1.0)
    for (a, b), sgn in zip(aversions, side):
        m = (t >= a) & (t < b)
        gx[m] = sgn * rg.uniform(0.5, 0.9, int(m.sum()))

    rconf = stream(seed, pid, "confidence")
    conf = np.full(n, 0.95)
    if spec.invalid_frac > 0:
        conf[rconf.random(n) < spec.invalid_frac] = 0.2

    channels = {
        "pitch": (pitch, Unit.RADIANS), "yaw": (yaw, Unit.RADIANS), "roll": (roll, Unit.RADIANS),
        "gaze_angle_x": (gx, Unit.RADIANS), "gaze_angle_y": (gy, Unit.RADIANS),
        "au04": (au04, Unit.LIKELIHOOD), "au06": (au06, Unit.LIKELIHOOD),
        "au12_likelihood": (au12, Unit.LIKELIHOOD), "eye_contact_score": (contact, Unit.LIKELIHOOD),
    }
    frames = [FrameSeries(pid, name, t, v, unit=u, confidence=conf) for name, (v, u) in channels.items()]

    truth = {
        "nod": [Instance(a, b, "nod") for a, b in nods],
        "smile": [Instance(a, b, "smile") for a, b in smiles],
        "gaze_off": [Instance(a, b, "gaze_off") for a, b in aversions],
    }
    annotations: dict[tuple[str, str], list[Instance]] = {}
    ra = stream(seed, pid, "annotators")
    for behavior, intervals in (("nod", nods), ("smile", smiles), ("gaze_off", aversions)):
        k = spec.nod_annotators if behavior == "nod" else spec.other_annotators
        for i in range(k):
            ann = _annotate(ra, intervals, spec, total)
            if ann:
                annotations[(f"A{i + 1}", behavior)] = [Instance(a, b, behavior) for a, b in ann]
    shake_list = [Instance(a, b, "nod") for a, b in shakes]
    return SynthParticipant(pid, int(label), frames, seg, annotations, truth, shake_list)


def cohort_labels(spec: SynthSpec, seed: int) -> list[tuple[str, int]]:
    """Participant ids with labels; label order is a seeded permutation."""
    n = spec.n_control + spec.n_clinical
    labels = np.array([0] * spec.n_control + [1] * spec.n_clinical)
    labels = labels[stream(seed, "cohort", "labels").permutation(n)]
    width = max(2, len(str(n)))
    return [(f"P{i + 1:0{width}d}", int(lab)) for i, lab in enumerate(labels)]


def generate_cohort(spec: SynthSpec, seed: int) -> list[SynthParticipant]:
    return [generate_participant(spec, seed, pid, lab) for pid, lab in cohort_labels(spec, seed)]


def write_cohort(cohort: list[SynthParticipant], out_dir: str, spec: SynthSpec | None = None,
                 seed: int | None = None) -> None:
    """Write the standard input layout plus ground truth (``truth.csv``, ``shakes.csv``)."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, ingest.PARTICIPANTS_FILE), "w", encoding="utf-8") as fh:
        fh.write("participant,label\n")
        for p in cohort:
            fh.write(f"{p.participant_id},{p.label}\n")
    if spec is not None:
        meta = {"seed": seed, "synth": _plain(dataclasses.asdict(spec))}
        with open(os.path.join(out_dir, "synth_spec.yaml"), "w", encoding="utf-8") as fh:
            yaml.safe_dump(meta, fh, sort_keys=True)
    for p in cohort:
        d = os.path.join(out_dir, p.participant_id)
        os.makedirs(d, exist_ok=True)
        files = {
            ingest.FRAMES_FILE: ingest.serialize_frames(p.frames),
            ingest.SEGMENTS_FILE: ingest.serialize_segmentation(p.segmentation),
            ingest.ANNOTATIONS_FILE: ingest.serialize_annotations(p.annotations),
            "truth.csv": ingest.serialize_annotations(
                {("truth", b): v for b, v in p.truth.items() if v}),
            "shakes.csv": "start,stop\n" + "".join(
                f"{i.start_s!r},{i.end_s!r}\n" for i in p.shakes),
        }
        for name, text in files.items():
            with open(os.path.join(d, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj
