"""Ground perturbation detection from local-frame gait kinematics."""

from .detector import (DetectorConfig, DetectorOutput, DetectorSession, StepOutput, TrialScore,
                       alpha, classify_and_delay, phi, run_batch, run_streaming)
from .errors import GaitPDError
from .ingest import PerturbationLabel, TrialRecording, parse_trial, read_trial, serialize_trial
from .kinematics import N_STATES, STATE_NAMES
from .pipeline import PreparedTrial, ProcessingConfig, detect, prepare
from .stats import PhaseBandModel
from .synth import GaitModelParams, PerturbationSpec, benchmark_matrix, generate_matrix, generate_trial

__version__ = "0.1.0"
