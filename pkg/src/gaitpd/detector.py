"""Kinematic-state perturbation detector.

Per sample, each state is compared with the ±k·sd band of its phase bin.
The exceedance (alpha) of every state is scaled by the state's coefficient
of variation and the ratios are averaged into a single deviation value
(phi) in [0, 1).  A perturbation is flagged when phi reaches the threshold.

Two drivers produce identical :class:`DetectorOutput` objects:
:class:`DetectorSession` (sample-by-sample, the real-time path) and
:func:`run_batch` (segment first, then vectorised per cycle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import OnsetOutsideSegmentation
from .gait import GaitCycle, resample_cycle, resample_segment
from .ingest import PerturbationLabel
from .kinematics import N_STATES
from .stats import DEFAULT_EPSILON, DEFAULT_WINDOW_CYCLES, PhaseBandModel

_subtract, _absolute, _maximum, _add, _divide = (
    np.subtract, np.absolute, np.maximum, np.add, np.divide)
_add_reduce = np.add.reduce

# Smallest positive double: keeps 0/0 terms at 0 without changing any other quotient.
_TINY = 5e-324


@dataclass(frozen=True)
class DetectorConfig:
    threshold_phi: float = 0.125
    band_k: float = 2.0
    window_cycles: int = DEFAULT_WINDOW_CYCLES
    epsilon: float = DEFAULT_EPSILON
    bins: int = 100
    # phi level that keeps a cycle out of the rolling window; independent of
    # threshold_phi so that phi traces do not depend on the detection threshold
    exclusion_phi: float = 0.125
    tp_window_cycles: float = 1.5

    def __post_init__(self):
        if not 0 < self.threshold_phi < 1:
            raise ValueError("threshold_phi must lie in (0, 1)")
        if not self.band_k > 0:
            raise ValueError("band_k must be positive")
        if self.window_cycles < 1 or self.bins < 2:
            raise ValueError("window_cycles >= 1 and bins >= 2 required")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.tp_window_cycles > 0:
            raise ValueError("tp_window_cycles must be positive")


def alpha(x, mean, sd, band_k: float = 2.0):
    """Exceedance of ``x`` beyond ``mean ± band_k * sd``.

    Returns ``(magnitude, sign)``; sign is 0 whenever magnitude is 0.
    """
    d = np.asarray(x, dtype=float) - mean
    mag = np.maximum(np.abs(d) - band_k * np.asarray(sd, dtype=float), 0.0)
    sign = np.where(mag > 0, np.sign(d), 0.0)
    if mag.ndim == 0:
        return float(mag), int(sign)
    return mag, sign.astype(int)


def phi_terms(alphas, covs) -> np.ndarray:
    """Per-state ratios ``alpha / (2C + alpha)``, with 0/0 taken as 0."""
    a = np.asarray(alphas, dtype=float)
    return a / np.maximum(2.0 * np.asarray(covs, dtype=float) + a, _TINY)


def phi(alphas, covs) -> float:
    """Mean of the per-state ratios over the last axis."""
    t = phi_terms(alphas, covs)
    out = t.sum(axis=-1) / t.shape[-1]
    return float(out) if np.ndim(out) == 0 else out


class StepOutput(NamedTuple):
    i: int
    phase: Optional[float]
    phi: Optional[float]
    alpha: Optional[np.ndarray]
    detected: bool
    status: str  # "skipped" | "calibrating" | "tracking"

    def to_record(self) -> dict:
        return {
            "i": self.i,
            "phase": None if self.phase is None else float(self.phase),
            "phi": None if self.phi is None else float(self.phi),
            "alpha": [0.0] * N_STATES if self.alpha is None else [float(a) + 0.0 for a in self.alpha],
            "detected": bool(self.detected),
        }


@dataclass
class CycleRecord:
    start_sample: int
    end_sample: int
    duration_s: float
    calibrating: bool
    crossed: bool
    gated: bool
    pushed: bool
    crossing_phase: Optional[float] = None

    @property
    def label(self) -> str:
        return "perturbed" if self.crossed else "unperturbed"

    @property
    def cycle(self) -> GaitCycle:
        return GaitCycle(self.start_sample, self.end_sample, self.duration_s)


@dataclass
class DetectorOutput:
    """Per-sample trace plus per-cycle labels of one trial."""

    phase: np.ndarray
    phi: np.ndarray
    alpha: np.ndarray
    detected: np.ndarray
    detection_sample: Optional[int]
    cycles: List[CycleRecord]
    threshold: float
    n_skipped: int = 0
    trial_id: str = ""

    def records(self):
        """JSON-ready per-sample records (NaN becomes None)."""
        for i in range(self.phi.shape[0]):
            ph = self.phase[i]
            p = self.phi[i]
            a = self.alpha[i]
            yield {
                "i": i,
                "phase": None if math.isnan(ph) else float(ph),
                "phi": None if math.isnan(p) else float(p),
                "alpha": [0.0 if math.isnan(v) else float(v) + 0.0 for v in a],
                "detected": bool(self.detected[i]),
            }


def _two_c_floor(c):
    """2C floored at the smallest subnormal so that 0 / (2C + 0) is 0."""
    return np.maximum(2.0 * c, _TINY)


def _admit(calibrating: bool, plausible: bool, gated: bool, prev_gated: bool) -> bool:
    """Window admission rule shared by both drivers."""
    if not plausible:
        return False
    if calibrating:
        return True
    return not gated and not prev_gated


class DetectorSession:
    """Single-owner streaming detector; feed samples strictly in order."""

    def __init__(self, config: DetectorConfig = DetectorConfig(), sample_rate: float = 100.0):
        self.config = config
        self.sample_rate = float(sample_rate)
        self.model = PhaseBandModel(config.window_cycles, config.bins, N_STATES, config.epsilon)
        self.cycles: List[CycleRecord] = []
        self.detection_sample: Optional[int] = None
        self.n_skipped = 0
        self._i = 0
        self._buf: list = []
        self._start: Optional[int] = None
        self._crossed = False
        self._gated = False
        self._crossing_phase = None
        self._calibrating = True
        self._prev_gated = False
        self._prev_phi = None
        self._bins = config.bins
        self._thr = config.threshold_phi
        self._gate = config.exclusion_phi
        self._d = np.empty(N_STATES)
        self._mag = np.empty(N_STATES)
        self._zero = np.zeros(N_STATES)
        self._denom = np.empty(N_STATES)
        self._load_model()

    def _load_model(self):
        m = self.model
        if m.valid:
            self._mean = m.mean
            self._band = self.config.band_k * m.sd
            self._two_c = _two_c_floor(m.cov)
        else:
            self._mean = None

    def _close_cycle(self, end: int, closing_sample: np.ndarray):
        cfg = self.config
        start = self._start
        cycle = GaitCycle(start, end, (end - start) / self.sample_rate)
        self._buf.append(closing_sample)
        matrix = resample_segment(np.array(self._buf), cfg.bins)
        pushed = _admit(self._calibrating, cycle.plausible, self._gated, self._prev_gated)
        self.cycles.append(CycleRecord(start, end, cycle.duration_s, self._calibrating,
                                       self._crossed, self._gated, pushed, self._crossing_phase))
        if not self._calibrating:
            self._prev_gated = self._gated
        if pushed:
            self.model = self.model.push(matrix)
            self._load_model()

    def step(self, state_vector, phase=None, cycle_boundary: bool = False) -> StepOutput:
        x = state_vector if type(state_vector) is np.ndarray else np.asarray(state_vector, dtype=float)
        i = self._i
        self._i = i + 1
        if cycle_boundary:
            if self._start is not None:
                self._close_cycle(i, x)
            self._start = i
            self._buf = []
            self._crossed = self._gated = False
            self._crossing_phase = None
            self._calibrating = self._mean is None
        detected = self.detection_sample is not None
        if self._start is None or phase is None or phase != phase:
            self.n_skipped += 1
            self._prev_phi = None
            return StepOutput(i, None, None, None, detected, "skipped")
        self._buf.append(x.copy())
        if self._mean is None:
            self._prev_phi = None
            return StepOutput(i, phase, None, None, detected, "calibrating")

        b = int(phase * self._bins / 100.0 + 0.5) % self._bins
        d, mag, denom = self._d, self._mag, self._denom
        _subtract(x, self._mean[b], out=d)
        _absolute(d, out=mag)
        _subtract(mag, self._band[b], out=mag)
        _maximum(mag, self._zero, out=mag)
        _add(self._two_c[b], mag, out=denom)
        _divide(mag, denom, out=denom)
        p = float(_add_reduce(denom)) / N_STATES

        if p >= self._thr:
            if not self._crossed:
                self._crossed = True
                self._crossing_phase = phase
            if not detected and (self._prev_phi is None or self._prev_phi < self._thr):
                self.detection_sample = i
                detected = True
        if p >= self._gate:
            self._gated = True
        self._prev_phi = p
        return StepOutput(i, phase, p, np.copysign(mag, d), detected, "tracking")


def run_streaming(states, phase, events, config: DetectorConfig = DetectorConfig(),
                  sample_rate: float = 100.0, trial_id: str = "") -> DetectorOutput:
    """Drive a :class:`DetectorSession` over a whole prepared trial."""
    states = np.asarray(states, dtype=float)
    n = states.shape[0]
    boundary = np.zeros(n, dtype=bool)
    boundary[np.asarray(events, dtype=int)] = True
    session = DetectorSession(config, sample_rate)
    phi_out = np.full(n, np.nan)
    alpha_out = np.full((n, N_STATES), np.nan)
    detected = np.zeros(n, dtype=bool)
    for i in range(n):
        ph = phase[i]
        out = session.step(states[i], None if ph != ph else float(ph), bool(boundary[i]))
        if out.phi is not None:
            phi_out[i] = out.phi
            alpha_out[i] = out.alpha
        detected[i] = out.detected
    return DetectorOutput(np.asarray(phase, dtype=float), phi_out, alpha_out, detected,
                          session.detection_sample, session.cycles, config.threshold_phi,
                          session.n_skipped, trial_id)


def run_batch(states, cycles: List[GaitCycle], phase, config: DetectorConfig = DetectorConfig(),
              trial_id: str = "") -> DetectorOutput:
    """Reference computation: resample every cycle up front, then evaluate
    each cycle against the window built from the cycles admitted before it."""
    states = np.asarray(states, dtype=float)
    phase = np.asarray(phase, dtype=float)
    n = states.shape[0]
    thr = config.threshold_phi
    matrices = [resample_cycle(states, c, config.bins) for c in cycles]
    model = PhaseBandModel(config.window_cycles, config.bins, N_STATES, config.epsilon)
    phi_out = np.full(n, np.nan)
    alpha_out = np.full((n, N_STATES), np.nan)
    records = []
    prev_gated = False
    for c, matrix in zip(cycles, matrices):
        calibrating = not model.valid
        crossed = gated = False
        crossing_phase = None
        if not calibrating:
            idx = np.arange(c.start_sample, c.end_sample)
            b = (phase[idx] * config.bins / 100.0 + 0.5).astype(int) % config.bins
            d = states[idx] - model.mean[b]
            mag = np.maximum(np.abs(d) - (config.band_k * model.sd)[b], 0.0)
            terms = mag / (_two_c_floor(model.cov)[b] + mag)
            p = terms.sum(axis=-1) / N_STATES
            phi_out[idx] = p
            alpha_out[idx] = np.copysign(mag, d)
            hits = np.flatnonzero(p >= thr)
            if hits.size:
                crossed = True
                crossing_phase = float(phase[idx[hits[0]]])
            gated = bool(np.any(p >= config.exclusion_phi))
        pushed = _admit(calibrating, c.plausible, gated, prev_gated)
        records.append(CycleRecord(c.start_sample, c.end_sample, c.duration_s, calibrating,
                                   crossed, gated, pushed, crossing_phase))
        if not calibrating:
            prev_gated = gated
        if pushed:
            model = model.push(matrix)

    above = phi_out >= thr
    prev = np.concatenate(([False], above[:-1]))
    ups = np.flatnonzero(above & ~prev)
    detection = int(ups[0]) if ups.size else None
    detected = np.zeros(n, dtype=bool)
    if detection is not None:
        detected[detection:] = True
    return DetectorOutput(phase, phi_out, alpha_out, detected, detection, records, thr,
                          int(np.isnan(phase).sum()), trial_id)


# -- scoring -----------------------------------------------------------------

@dataclass
class TrialScore:
    trial_id: str
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    delay_pct: Optional[float] = None
    detection_sample: Optional[int] = None
    perturbed: bool = False
    kind: Optional[str] = None

    @property
    def n_cycles(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def as_row(self) -> dict:
        return {
            "trial_id": self.trial_id, "tp": self.tp, "fp": self.fp, "tn": self.tn,
            "fn": self.fn, "delay_pct": self.delay_pct,
            "detection_sample": self.detection_sample, "perturbed": self.perturbed,
            "kind": self.kind,
        }


@dataclass(frozen=True)
class TruthWindow:
    onset: int
    last: int  # last sample (inclusive) in which a crossing still counts
    onset_cycle: GaitCycle
    first_cycle: int  # index of the onset cycle in the cycle list
    stop_cycle: int  # cycles from here on are recovery and not scored


def truth_window(cycles: List[GaitCycle], onset: int, tp_window_cycles: float) -> TruthWindow:
    for k, c in enumerate(cycles):
        if c.contains(onset):
            last = int(math.floor(onset + tp_window_cycles * c.n_samples))
            stop = k
            while stop < len(cycles) and cycles[stop].start_sample <= last:
                stop += 1
            return TruthWindow(onset, last, c, k, stop)
    raise OnsetOutsideSegmentation(f"onset sample {onset} is not inside any gait cycle")


def score_crossings(crossing: np.ndarray, cycles: List[GaitCycle], evaluable: List[bool],
                    truth: Optional[PerturbationLabel], tp_window_cycles: float = 1.5,
                    trial_id: str = "") -> TrialScore:
    """Confusion counts of one trial from a boolean per-sample crossing trace.

    Evaluable cycles before the onset cycle are TN/FP.  The cycles spanned by
    ``[onset, onset + tp_window_cycles * onset-cycle length]`` form a single
    truth unit scored TP or FN; later cycles are recovery and are not
    scored.  Without truth every evaluable cycle is TN/FP.
    """
    score = TrialScore(trial_id, perturbed=truth is not None,
                       kind=None if truth is None else truth.kind)
    stop = len(cycles)
    tw = None
    if truth is not None:
        tw = truth_window(cycles, truth.onset_sample, tp_window_cycles)
        stop = tw.first_cycle
    for c, ok in zip(cycles[:stop], evaluable[:stop]):
        if not ok:
            continue
        if crossing[c.start_sample:c.end_sample].any():
            score.fp += 1
        else:
            score.tn += 1
    if tw is not None:
        if not evaluable[tw.first_cycle]:
            score.fn += 1
            return score
        hits = np.flatnonzero(crossing[tw.onset:tw.last + 1])
        if hits.size:
            score.tp += 1
            score.detection_sample = tw.onset + int(hits[0])
            score.delay_pct = 100.0 * int(hits[0]) / tw.onset_cycle.n_samples
        else:
            score.fn += 1
    return score


def classify_and_delay(output: DetectorOutput, truth: Optional[PerturbationLabel],
                       threshold: Optional[float] = None, tp_window_cycles: float = 1.5,
                       trial_id: Optional[str] = None) -> TrialScore:
    """Score a detector trace at ``threshold`` (default: the run's own)."""
    thr = output.threshold if threshold is None else threshold
    crossing = output.phi >= thr  # NaN compares False
    cycles = [r.cycle for r in output.cycles]
    evaluable = [not r.calibrating for r in output.cycles]
    return score_crossings(crossing, cycles, evaluable, truth, tp_window_cycles,
                           output.trial_id if trial_id is None else trial_id)
