"""Threshold sweep over labelled trials and threshold selection.

phi traces do not depend on the detection threshold, so each trial is run
once and the sweep only re-thresholds the cached traces.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .detector import DetectorConfig, DetectorOutput, classify_and_delay, truth_window
from .errors import EmptyTrialSet
from .ingest import PerturbationLabel
from .parallel import pmap
from .pipeline import PreparedTrial, ProcessingConfig, detect, prepare


def threshold_grid(t_min: float, t_max: float, step: float) -> np.ndarray:
    """Inclusive grid ``t_min, t_min + step, ...`` rounded to 12 decimals."""
    if not t_min < t_max:
        raise ValueError("t_min must be below t_max")
    if not step > 0:
        raise ValueError("step must be positive")
    n = int(math.floor((t_max - t_min) / step + 1e-9)) + 1
    return np.round(t_min + step * np.arange(n), 12)


@dataclass
class SweepResult:
    thresholds: np.ndarray
    accuracy: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tp: np.ndarray
    tn: np.ndarray
    mean_delay_pct: np.ndarray
    chosen: int = 0

    @property
    def threshold(self) -> float:
        return float(self.thresholds[self.chosen])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("threshold,accuracy,fp,fn,tp,tn,mean_delay_pct\n")
        for j, t in enumerate(self.thresholds):
            d = self.mean_delay_pct[j]
            out.write(f"{t:.12g},{self.accuracy[j]:.9g},{self.fp[j]},{self.fn[j]},"
                      f"{self.tp[j]},{self.tn[j]},{'' if math.isnan(d) else f'{d:.9g}'}\n")
        return out.getvalue()

    def equals(self, other: "SweepResult") -> bool:
        return (
            self.chosen == other.chosen
            and all(
                np.array_equal(getattr(self, f), getattr(other, f), equal_nan=True)
                for f in ("thresholds", "accuracy", "fp", "fn", "tp", "tn", "mean_delay_pct")
            )
        )


@dataclass
class TraceSummary:
    """What the sweep needs from one trial's phi trace."""

    trial_id: str
    cycle_max: np.ndarray  # max phi of every scored non-truth cycle
    truth_prefix: Optional[np.ndarray]  # running max of phi over the TP window
    onset_cycle_samples: int = 0

    @property
    def perturbed(self) -> bool:
        return self.truth_prefix is not None


def summarize(output: DetectorOutput, truth: Optional[PerturbationLabel],
              tp_window_cycles: float = 1.5) -> TraceSummary:
    phi = np.where(np.isnan(output.phi), -np.inf, output.phi)
    cycles = [r.cycle for r in output.cycles]
    stop = len(cycles)
    prefix = None
    n_onset = 0
    if truth is not None:
        tw = truth_window(cycles, truth.onset_sample, tp_window_cycles)
        stop = tw.first_cycle
        n_onset = tw.onset_cycle.n_samples
        if output.cycles[tw.first_cycle].calibrating:
            prefix = np.full(1, -np.inf)
        else:
            prefix = np.maximum.accumulate(phi[tw.onset:tw.last + 1])
    cmax = [phi[r.start_sample:r.end_sample].max() for r in output.cycles[:stop] if not r.calibrating]
    return TraceSummary(output.trial_id, np.array(cmax, dtype=float), prefix, n_onset)


def _mean_delay(delays: List[float]) -> float:
    return math.fsum(delays) / len(delays) if delays else math.nan


def _accuracy(tp, tn, total):
    return (tp + tn) / total if total else math.nan


def sweep_summaries(summaries: Sequence[TraceSummary], thresholds) -> SweepResult:
    """Confusion counts and mean TP delay at every threshold."""
    if not summaries:
        raise EmptyTrialSet("no trials to sweep")
    thr = np.asarray(thresholds, dtype=float)
    m = thr.shape[0]
    fp = np.zeros(m, dtype=int)
    tn = np.zeros(m, dtype=int)
    tp = np.zeros(m, dtype=int)
    fn = np.zeros(m, dtype=int)
    delays = [[] for _ in range(m)]
    for s in summaries:
        hits = (s.cycle_max[:, None] >= thr[None, :]).sum(axis=0)
        fp += hits
        tn += s.cycle_max.shape[0] - hits
        if s.truth_prefix is None:
            continue
        idx = np.searchsorted(s.truth_prefix, thr, side="left")
        found = idx < s.truth_prefix.shape[0]
        tp += found
        fn += ~found
        for j in np.flatnonzero(found):
            delays[j].append(100.0 * int(idx[j]) / s.onset_cycle_samples)
    total = fp + tn + tp + fn
    result = SweepResult(
        thresholds=thr,
        accuracy=np.array([_accuracy(tp[j], tn[j], total[j]) for j in range(m)]),
        fp=fp, fn=fn, tp=tp, tn=tn,
        mean_delay_pct=np.array([_mean_delay(d) for d in delays]),
    )
    result.chosen = select_index(result)
    return result


def select_index(result: SweepResult) -> int:
    """Lexicographic argmin of (FP + FN, mean delay, threshold)."""
    if len(result.thresholds) == 0:
        raise ValueError("empty sweep result")
    errors = result.fp + result.fn
    delay = np.where(np.isnan(result.mean_delay_pct), np.inf, result.mean_delay_pct)
    order = np.lexsort((result.thresholds, delay, errors))
    return int(order[0])


def select_threshold(result: SweepResult) -> float:
    return float(result.thresholds[select_index(result)])


def _run_one(args):
    prepared, config, tp_window = args
    out = detect(prepared, config)
    return summarize(out, prepared.trial.perturbation, tp_window)


def prepare_all(trials, proc: ProcessingConfig = ProcessingConfig()) -> List[PreparedTrial]:
    return pmap(prepare, list(trials), proc)


def sweep(trials, t_min: float = 0.01, t_max: float = 1.0, step: float = 0.001,
          config: DetectorConfig = DetectorConfig(),
          proc: ProcessingConfig = ProcessingConfig()) -> SweepResult:
    """Run the detector once per trial, then sweep thresholds on the traces.

    ``trials`` may hold :class:`TrialRecording` or :class:`PreparedTrial`
    objects; a trial without a perturbation label counts as unperturbed.
    """
    trials = list(trials)
    if not trials:
        raise EmptyTrialSet("no trials to sweep")
    prepared = [t if isinstance(t, PreparedTrial) else None for t in trials]
    todo = [t for t, p in zip(trials, prepared) if p is None]
    done = iter(prepare_all(todo, proc)) if todo else iter(())
    prepared = [p if p is not None else next(done) for p in prepared]
    summaries = pmap(_run_one, [(p, config, config.tp_window_cycles) for p in prepared])
    return sweep_summaries(summaries, threshold_grid(t_min, t_max, step))


def sweep_naive(prepared: Sequence[PreparedTrial], thresholds,
                config: DetectorConfig = DetectorConfig()) -> SweepResult:
    """Reference sweep: rerun the full detector at every threshold."""
    if not prepared:
        raise EmptyTrialSet("no trials to sweep")
    thr = np.asarray(thresholds, dtype=float)
    rows = {f: [] for f in ("fp", "fn", "tp", "tn")}
    acc, mean_delay = [], []
    for t in thr:
        cfg = replace(config, threshold_phi=float(t))
        counts = dict.fromkeys(rows, 0)
        delays = []
        for p in prepared:
            score = classify_and_delay(detect(p, cfg), p.trial.perturbation,
                                       tp_window_cycles=cfg.tp_window_cycles)
            for f in counts:
                counts[f] += getattr(score, f)
            if score.delay_pct is not None:
                delays.append(score.delay_pct)
        for f in rows:
            rows[f].append(counts[f])
        total = sum(counts.values())
        acc.append(_accuracy(counts["tp"], counts["tn"], total))
        mean_delay.append(_mean_delay(delays))
    result = SweepResult(thr, np.array(acc), *(np.array(rows[f], dtype=int) for f in ("fp", "fn", "tp", "tn")),
                         np.array(mean_delay))
    result.chosen = select_index(result)
    return result
