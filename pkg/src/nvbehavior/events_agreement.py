"""Frame tracks <-> event instances, annotator votes, and agreement metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data_model import AgreementReport, BehaviorTrack, Instance, ValidationError

# Boundary comparisons tolerate float noise in timestamps.
_TIME_EPS = 1e-9


def median_period(timestamps) -> float:
    t = np.asarray(timestamps, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.median(np.diff(t)))


def runs(mask) -> list[tuple[int, int]]:
    """Inclusive ``(first, last)`` index pairs of the True runs in ``mask``."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        return []
    padded = np.concatenate(([False], m, [False])).astype(np.int8)
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def merge_instances(instances: Sequence[Instance], gap_s: float = 0.0,
                    strict: bool = False) -> list[Instance]:
    """Union overlapping instances and join those separated by at most
    ``gap_s`` (strictly less than ``gap_s`` when ``strict``)."""
    out: list[Instance] = []
    for inst in sorted(instances):
        if out:
            gap = inst.start_s - out[-1].end_s
            joined = gap < gap_s if strict else gap <= gap_s
            if gap <= 0 or joined:
                last = out[-1]
                out[-1] = Instance(last.start_s, max(last.end_s, inst.end_s), last.behavior)
                continue
        out.append(inst)
    return out


def frames_to_instances(track: BehaviorTrack, merge_gap_s: float = 0.15,
                        min_duration_s: float = 0.1) -> list[Instance]:
    """Run-length encode the valid 1-frames of ``track`` into instances.

    A run ends one median frame period after its last frame, or at the next
    frame's timestamp if that comes sooner.
    """
    t = track.timestamps
    on = (track.frames == 1) & track.valid
    period = median_period(t)
    found = []
    for first, last in runs(on):
        end = t[last] + period
        if last + 1 < t.size:
            end = min(end, t[last + 1])
        if end <= t[first]:
            end = t[first] + max(period, 2 * _TIME_EPS)
        found.append(Instance(float(t[first]), float(end), track.behavior))
    merged = merge_instances(found, merge_gap_s)
    return [i for i in merged if i.duration >= min_duration_s - _TIME_EPS]


def instances_to_frames(instances: Sequence[Instance], timestamps, *,
                        participant_id: str = "", behavior: str | None = None,
                        source: str = "instances", valid=None) -> BehaviorTrack:
    """Frame is 1 iff its timestamp falls in ``[start, end)`` of any instance."""
    t = np.asarray(timestamps, dtype=float)
    frames = np.zeros(t.size, dtype=np.int8)
    for inst in instances:
        lo = np.searchsorted(t, inst.start_s - _TIME_EPS, side="left")
        hi = np.searchsorted(t, inst.end_s - _TIME_EPS, side="left")
        frames[lo:hi] = 1
    if behavior is None:
        behavior = instances[0].behavior if len(instances) else "nod"
    return BehaviorTrack(participant_id, behavior, source, t, frames, valid)


def _check_aligned(tracks: Sequence[BehaviorTrack]) -> None:
    ref = tracks[0].timestamps
    for tr in tracks[1:]:
        if tr.timestamps.shape != ref.shape or not np.array_equal(tr.timestamps, ref):
            raise ValidationError(
                f"misaligned tracks: {tracks[0].source} vs {tr.source}"
            )


def majority_vote(tracks: Sequence[BehaviorTrack], quorum: int = 2,
                  source: str = "majority") -> BehaviorTrack:
    """Frame is 1 iff at least ``quorum`` tracks mark it.

    A frame is valid when at least ``quorum`` tracks are valid there.
    """
    if quorum < 1:
        raise ValueError("quorum must be >= 1")
    if len(tracks) < quorum:
        raise ValidationError(f"need at least {quorum} tracks, got {len(tracks)}")
    _check_aligned(tracks)
    stack = np.stack([(tr.frames == 1) & tr.valid for tr in tracks])
    valid = np.stack([tr.valid for tr in tracks]).sum(axis=0) >= quorum
    votes = (stack.sum(axis=0) >= quorum).astype(np.int8)
    first = tracks[0]
    return BehaviorTrack(first.participant_id, first.behavior, source,
                         first.timestamps, votes, valid)


def consensus_mask(a: BehaviorTrack, b: BehaviorTrack) -> np.ndarray:
    """True where both tracks are valid and agree."""
    _check_aligned([a, b])
    return (a.frames == b.frames) & a.valid & b.valid


def consensus_track(a: BehaviorTrack, b: BehaviorTrack,
                    source: str = "consensus") -> BehaviorTrack:
    """Track of ``a`` restricted to frames where ``a`` and ``b`` agree."""
    return a.replace(source=source, valid=consensus_mask(a, b))


def kappa_from_confusion(confusion) -> tuple[float, float, float]:
    """``(p_o, p_e, kappa)`` for a 2x2 confusion matrix."""
    c = np.asarray(confusion, dtype=float)
    n = c.sum()
    if n <= 0:
        raise ValidationError("no overlapping valid frames")
    p_o = (c[0, 0] + c[1, 1]) / n
    a1 = (c[1, 0] + c[1, 1]) / n
    b1 = (c[0, 1] + c[1, 1]) / n
    p_e = a1 * b1 + (1.0 - a1) * (1.0 - b1)
    if p_e >= 1.0:
        kappa = 1.0 if p_o >= 1.0 else 0.0
    else:
        kappa = (p_o - p_e) / (1.0 - p_e)
    return float(p_o), float(p_e), float(kappa)


def confusion_matrix(a, b, mask=None) -> np.ndarray:
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if mask is not None:
        a, b = a[mask], b[mask]
    n11 = int(np.count_nonzero(a & b))
    n10 = int(np.count_nonzero(a & ~b))
    n01 = int(np.count_nonzero(~a & b))
    n00 = int(a.size - n11 - n10 - n01)
    return np.array([[n00, n01], [n10, n11]], dtype=np.int64)


def frame_kappa(a: BehaviorTrack, b: BehaviorTrack, mask=None) -> AgreementReport:
    """Cohen's kappa over frames valid in both tracks (and in ``mask``).

    If chance agreement is 1 (both tracks constant), kappa is 1 when the
    tracks agree everywhere and 0 otherwise.
    """
    _check_aligned([a, b])
    both = a.valid & b.valid
    if mask is not None:
        both = both & np.asarray(mask, dtype=bool)
    if not both.any():
        raise ValidationError("no overlapping valid frames")
    conf = confusion_matrix(a.frames, b.frames, both)
    p_o, p_e, kappa = kappa_from_confusion(conf)
    return AgreementReport(p_o, p_e, kappa, conf)


@dataclass(frozen=True)
class MatchingResult:
    pairs: list[tuple[Instance, Instance]] = field(default_factory=list)
    unmatched_a: list[Instance] = field(default_factory=list)
    unmatched_b: list[Instance] = field(default_factory=list)

    @property
    def n_a(self) -> int:
        return len(self.pairs) + len(self.unmatched_a)

    @property
    def n_b(self) -> int:
        return len(self.pairs) + len(self.unmatched_b)

    @property
    def dice_agreement(self) -> float:
        total = self.n_a + self.n_b
        # two empty lists agree trivially
        return 1.0 if total == 0 else 2.0 * len(self.pairs) / total

    @property
    def precision(self) -> float:
        return len(self.pairs) / self.n_a if self.n_a else 1.0

    @property
    def recall(self) -> float:
        return len(self.pairs) / self.n_b if self.n_b else 1.0


def instance_agreement(a: Sequence[Instance], b: Sequence[Instance]) -> MatchingResult:
    """Greedy one-to-one matching in time order on any positive overlap.

    Walks both sorted lists; at each step the earliest-starting unmatched
    ``a`` instance takes the earliest unmatched ``b`` instance it overlaps.
    The Dice ratio ``2 * matched / (n_a + n_b)`` equals the F1 score when
    ``b`` is treated as ground truth.
    """
    a = sorted(a)
    b = sorted(b)
    used = [False] * len(b)
    pairs, unmatched_a = [], []
    j0 = 0
    for ia in a:
        while j0 < len(b) and b[j0].end_s <= ia.start_s:
            j0 += 1
        hit = None
        j = j0
        while j < len(b) and b[j].start_s < ia.end_s:
            if not used[j] and min(ia.end_s, b[j].end_s) - max(ia.start_s, b[j].start_s) > 0:
                hit = j
                break
            j += 1
        if hit is None:
            unmatched_a.append(ia)
        else:
            used[hit] = True
            pairs.append((ia, b[hit]))
    unmatched_b = [ib for ib, u in zip(b, used) if not u]
    return MatchingResult(pairs, unmatched_a, unmatched_b)
