"""Right heel-strike detection, cycle segmentation and phase resampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientEvents, OutOfRange

DEFAULT_GRF_THRESHOLD_N = 20.0
DEFAULT_REFRACTORY_S = 0.4
DEFAULT_BINS = 100
PLAUSIBLE_DURATION_S = (0.4, 2.5)


@dataclass(frozen=True)
class GaitCycle:
    """Right heel strike to the next right heel strike (``end`` is exclusive
    for membership, but its sample closes the cycle for resampling)."""

    start_sample: int
    end_sample: int
    duration_s: float

    def __post_init__(self):
        if self.end_sample <= self.start_sample:
            raise ValueError("cycle end must follow its start")

    @property
    def n_samples(self) -> int:
        return self.end_sample - self.start_sample

    @property
    def plausible(self) -> bool:
        lo, hi = PLAUSIBLE_DURATION_S
        return lo <= self.duration_s <= hi

    def contains(self, sample: int) -> bool:
        return self.start_sample <= sample < self.end_sample


def detect_heel_strikes(grf_z, sample_rate: float,
                        threshold_n: float = DEFAULT_GRF_THRESHOLD_N,
                        refractory_s: float = DEFAULT_REFRACTORY_S) -> np.ndarray:
    """Indices of upward crossings of ``threshold_n``.

    A crossing closer than ``refractory_s`` to the previously accepted one
    is dropped.
    """
    if threshold_n <= 0:
        raise ValueError("threshold_n must be positive")
    f = np.asarray(grf_z, dtype=float)
    above = f >= threshold_n
    crossings = np.flatnonzero(above[1:] & ~above[:-1]) + 1
    min_gap = refractory_s * sample_rate
    events = []
    for i in crossings:
        if events and i - events[-1] < min_gap:
            continue
        events.append(int(i))
    return np.array(events, dtype=int)


def segment_and_phase(events, n_frames: int, sample_rate: float = 100.0):
    """Cycles between consecutive events and the per-sample phase in [0, 100).

    Samples outside the segmented region get NaN phase.
    """
    events = np.asarray(events, dtype=int)
    if events.size < 2:
        raise InsufficientEvents(f"need at least 2 heel strikes, got {events.size}")
    cycles = []
    phase = np.full(n_frames, np.nan)
    for start, end in zip(events[:-1], events[1:]):
        start, end = int(start), int(end)
        cycles.append(GaitCycle(start, end, (end - start) / sample_rate))
        idx = np.arange(start, min(end, n_frames))
        phase[idx] = 100.0 * (idx - start) / (end - start)
    return cycles, phase


def resample_cycle(states, cycle: GaitCycle, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Linear interpolation of each channel at phases ``k * 100 / bins``.

    The cycle is sliced out before interpolating, so the result only
    depends on the samples ``start..end`` inclusive.
    """
    states = np.asarray(states, dtype=float)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if cycle.start_sample < 0 or cycle.end_sample >= states.shape[0]:
        raise OutOfRange(
            f"cycle [{cycle.start_sample}, {cycle.end_sample}] outside {states.shape[0]} samples"
        )
    return resample_segment(states[cycle.start_sample:cycle.end_sample + 1], bins)


def resample_segment(segment: np.ndarray, bins: int) -> np.ndarray:
    """Resample a cycle given as its own samples (first and closing sample)."""
    span = segment.shape[0] - 1
    pos = np.arange(bins) * (span / bins)
    lo = np.floor(pos).astype(int)
    lo = np.minimum(lo, span - 1)
    w = (pos - lo)[:, None]
    seg = segment.reshape(segment.shape[0], -1)
    out = seg[lo] * (1.0 - w) + seg[lo + 1] * w
    return out.reshape((bins,) + segment.shape[1:])


def phase_bin(phase: float, bins: int = DEFAULT_BINS) -> int:
    """Nearest phase bin, wrapping the top half-bin onto bin 0."""
    return int(phase * bins / 100.0 + 0.5) % bins
