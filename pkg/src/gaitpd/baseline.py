"""Whole-body angular momentum (WBAM) benchmark detector.

A fixed ``mean ± k·sd`` band is fitted per channel on the steady cycles
that precede the evaluation region; detection is the first sample that
leaves the band.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import InsufficientHistory
from .detector import TrialScore, score_crossings
from .gait import GaitCycle

CHANNELS = ("sagittal", "frontal")


@dataclass(frozen=True)
class WbamBand:
    mean: float
    sd: float
    k: float = 4.0
    history_cycles: int = 3

    @property
    def lower(self) -> float:
        return self.mean - self.k * self.sd

    @property
    def upper(self) -> float:
        return self.mean + self.k * self.sd

    def outside(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v < self.lower) | (v > self.upper)


def fit_band(wbam, cycles: Sequence[GaitCycle], n_cycles: int = 3, before_sample: Optional[int] = None,
             k: float = 4.0) -> WbamBand:
    """Population mean/sd over the last ``n_cycles`` cycles ending at or
    before ``before_sample`` (default: the end of the recording)."""
    if not 3 <= n_cycles <= 5:
        raise ValueError("n_cycles must be between 3 and 5")
    w = np.asarray(wbam, dtype=float)
    limit = w.shape[0] if before_sample is None else before_sample
    history = [c for c in cycles if c.end_sample <= limit]
    if len(history) < n_cycles:
        raise InsufficientHistory(f"{len(history)} cycles before sample {limit}, need {n_cycles}")
    used = history[-n_cycles:]
    samples = np.concatenate([w[c.start_sample:c.end_sample] for c in used])
    return WbamBand(float(samples.mean()), float(samples.std()), k, n_cycles)


def detect_wbam(wbam: Dict[str, np.ndarray], bands: Dict[str, WbamBand], from_sample: int = 0) -> Optional[int]:
    """First sample at or after ``from_sample`` where any channel leaves its band."""
    first = None
    for name, values in wbam.items():
        hits = np.flatnonzero(bands[name].outside(np.asarray(values)[from_sample:]))
        if hits.size:
            i = from_sample + int(hits[0])
            first = i if first is None else min(first, i)
    return first


def crossing_trace(wbam: Dict[str, np.ndarray], bands: Dict[str, WbamBand],
                   channels: Optional[Sequence[str]] = None) -> np.ndarray:
    """Per-sample out-of-band flag, OR-ed over the chosen channels."""
    names = list(channels or wbam.keys())
    out = np.zeros(np.asarray(wbam[names[0]]).shape[0], dtype=bool)
    for name in names:
        out |= bands[name].outside(wbam[name])
    return out


def trial_channels(trial) -> Dict[str, np.ndarray]:
    if not trial.has_wbam:
        raise ValueError(f"trial {trial.trial_id!r} has no WBAM channels")
    return {"sagittal": trial.wbam_sagittal, "frontal": trial.wbam_frontal}


def score_wbam(trial, cycles: List[GaitCycle], n_cycles: int = 3, first_cycle: int = 10,
               k: float = 4.0, channels: Optional[Sequence[str]] = None,
               tp_window_cycles: float = 1.5) -> TrialScore:
    """Score one trial with the WBAM detector.

    Bands come from the ``n_cycles`` cycles right before ``first_cycle``;
    cycles from ``first_cycle`` on are scored exactly like the kinematic
    detector (see :func:`gaitpd.detector.score_crossings`).
    """
    if first_cycle >= len(cycles):
        raise InsufficientHistory("no cycles left to evaluate")
    wbam = trial_channels(trial)
    names = list(channels or CHANNELS)
    limit = cycles[first_cycle].start_sample
    bands = {name: fit_band(wbam[name], cycles, n_cycles, limit, k) for name in names}
    crossing = crossing_trace(wbam, bands, names)
    evaluable = [j >= first_cycle for j in range(len(cycles))]
    return score_crossings(crossing, cycles, evaluable, trial.perturbation, tp_window_cycles,
                           trial.trial_id)
