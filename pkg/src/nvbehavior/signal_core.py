"""Numeric building blocks for the nod detector.

Functions take plain arrays (values plus timestamps in seconds) so they can be
reused on any channel.  Everything here is deterministic and side-effect free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, peak_prominences


def moving_average(values, timestamps, window_s: float) -> np.ndarray:
    """Centered, time-based moving average.

    Each output frame is the mean of all frames whose timestamp lies within
    ``+-window_s / 2`` of it; near the edges the window is simply truncated.
    """
    if window_s <= 0:
        raise ValueError("window_s must be > 0")
    x = np.asarray(values, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    if t.shape != x.shape:
        raise ValueError("values and timestamps differ in length")
    half = window_s / 2.0
    lo = np.searchsorted(t, t - half, side="left")
    hi = np.searchsorted(t, t + half, side="right")
    # Summing deviations from the first value keeps constants exact.
    ref = x[0]
    csum = np.concatenate(([0.0], np.cumsum(x - ref)))
    return (csum[hi] - csum[lo]) / (hi - lo) + ref


def derivative(values, timestamps) -> np.ndarray:
    """Central differences inside, one-sided differences at both ends."""
    x = np.asarray(values, dtype=float)
    t = np.asarray(timestamps, dtype=float)
    if x.size < 2:
        raise ValueError("derivative needs at least 2 frames")
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])
    out[0] = (x[1] - x[0]) / (t[1] - t[0])
    out[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    return out


def mad(values) -> float:
    """Unscaled median absolute deviation."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("mad of empty input")
    return float(np.median(np.abs(x - np.median(x))))


def stillness_threshold(velocity, k_mad: float) -> float:
    """Velocity magnitude at or below which a frame counts as still."""
    if k_mad <= 0:
        raise ValueError("k_mad must be > 0")
    v = np.asarray(velocity, dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    spread = mad(v)
    if spread == 0.0:
        spread = 0.1 * float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return k_mad * spread


def stillness_mask(velocity, k_mad: float) -> np.ndarray:
    """Boolean mask, True where ``|v| <= k_mad * MAD(v)``.

    When the MAD is zero the spread falls back to a tenth of the sample
    standard deviation; if that is zero too, every frame is still.
    """
    v = np.asarray(velocity, dtype=float)
    thr = stillness_threshold(v, k_mad)
    if thr == 0.0:
        return np.ones(v.shape, dtype=bool)
    return np.abs(v) <= thr


@dataclass(frozen=True)
class ExtremumList:
    """Alternating local extrema of a signal.

    ``kinds`` holds +1 for a maximum and -1 for a minimum.
    """

    indices: np.ndarray
    kinds: np.ndarray
    prominences: np.ndarray

    def __len__(self) -> int:
        return int(self.indices.size)

    @property
    def maxima(self) -> np.ndarray:
        return self.indices[self.kinds > 0]

    @property
    def minima(self) -> np.ndarray:
        return self.indices[self.kinds < 0]


def _prominent(x: np.ndarray, min_prominence: float):
    peaks, _ = find_peaks(x)
    if peaks.size == 0:
        return peaks, np.empty(0)
    prom = peak_prominences(x, peaks)[0]
    keep = prom >= min_prominence
    return peaks[keep], prom[keep]


def find_extrema(values, min_prominence: float = 0.0) -> ExtremumList:
    """Local maxima and minima whose topographic prominence reaches
    ``min_prominence``.

    Minima are the maxima of the negated signal.  Flat extrema are reported
    at the middle of the plateau.  After filtering, runs of same-type
    extrema are collapsed to their most extreme member so that maxima and
    minima strictly alternate.
    """
    if min_prominence < 0:
        raise ValueError("min_prominence must be >= 0")
    x = np.asarray(values, dtype=float)
    if x.size < 3:
        return ExtremumList(np.empty(0, int), np.empty(0, int), np.empty(0))
    pmax, prom_max = _prominent(x, min_prominence)
    pmin, prom_min = _prominent(-x, min_prominence)

    idx = np.concatenate((pmax, pmin))
    kinds = np.concatenate((np.ones(pmax.size, int), -np.ones(pmin.size, int)))
    prom = np.concatenate((prom_max, prom_min))
    order = np.argsort(idx, kind="stable")
    idx, kinds, prom = idx[order], kinds[order], prom[order]

    keep_i: list[int] = []
    for j in range(idx.size):
        if keep_i and kinds[keep_i[-1]] == kinds[j]:
            last = keep_i[-1]
            # higher maximum / lower minimum wins; the earlier one on ties
            if kinds[j] * x[idx[j]] > kinds[last] * x[idx[last]]:
                keep_i[-1] = j
        else:
            keep_i.append(j)
    sel = np.asarray(keep_i, dtype=int)
    return ExtremumList(idx[sel], kinds[sel], prom[sel])
