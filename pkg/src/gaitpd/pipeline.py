"""Trial preparation shared by the detector, the baseline and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .detector import DetectorConfig, DetectorOutput, run_batch, run_streaming
from .gait import (DEFAULT_GRF_THRESHOLD_N, DEFAULT_REFRACTORY_S, GaitCycle,
                   detect_heel_strikes, segment_and_phase)
from .ingest import DEFAULT_MAX_GAP, GapReport, TrialRecording, fill_trial_gaps
from .kinematics import build_state_sequence


@dataclass(frozen=True)
class ProcessingConfig:
    smooth_window: int = 5
    velocity_frame: str = "global"
    max_gap: int = DEFAULT_MAX_GAP
    grf_threshold_n: float = DEFAULT_GRF_THRESHOLD_N
    refractory_s: float = DEFAULT_REFRACTORY_S


@dataclass
class PreparedTrial:
    trial: TrialRecording
    states: np.ndarray
    events: np.ndarray
    cycles: List[GaitCycle]
    phase: np.ndarray
    gaps: List[GapReport] = field(default_factory=list)


def prepare(trial: TrialRecording, proc: ProcessingConfig = ProcessingConfig()) -> PreparedTrial:
    """Gap fill, build the 16 states, find right heel strikes and phase."""
    filled, gaps = fill_trial_gaps(trial, proc.max_gap)
    states = build_state_sequence(filled, proc.smooth_window, proc.velocity_frame)
    events = detect_heel_strikes(filled.grf_right_z, filled.sample_rate,
                                 proc.grf_threshold_n, proc.refractory_s)
    cycles, phase = segment_and_phase(events, filled.n_frames, filled.sample_rate)
    return PreparedTrial(filled, states, events, cycles, phase, gaps)


def detect(prepared: PreparedTrial, config: DetectorConfig = DetectorConfig(),
           mode: str = "stream") -> DetectorOutput:
    tid = prepared.trial.trial_id
    if mode == "stream":
        return run_streaming(prepared.states, prepared.phase, prepared.events, config,
                             prepared.trial.sample_rate, tid)
    if mode == "batch":
        return run_batch(prepared.states, prepared.cycles, prepared.phase, config, tid)
    raise ValueError(f"unknown mode {mode!r}")
