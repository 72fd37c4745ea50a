"""Deterministic synthetic treadmill walking with labelled perturbations.

The template is kinematic, not physical: heels follow a belt-driven stance
and a cycloidal swing, the pelvis sways sinusoidally about a fixed mean,
and the right-foot GRF is a smoothed rectangular stance pulse.  Everything
is expressed in the treadmill (lab) frame, x forward, y left, z up.

Perturbations are imposed on the template from the onset sample on:

* ``trip`` / ``slip`` -- the right belt changes speed at ``magnitude`` m/s²
  for ``duration_s`` and then returns at 0.5 m/s²; the change is added to
  the right heel while it is in stance, and the pelvis is dragged by a
  fraction of it before drifting back to its usual place.
* ``translation`` -- both heels ride a platform displaced by ``magnitude``
  metres along a compass direction; the pelvis catches up with a lag.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, InvalidSpec
from .ingest import DIRECTIONS, KINDS, MARKER_INDEX, PerturbationLabel, TrialRecording

STANCE_FRACTION = 0.6
BODY_WEIGHT_N = 700.0
GRF_NOISE_N = 1.0
WBAM_NOISE = 0.0015
BELT_RETURN_RATE = 0.5  # m/s², recovery of the belt to nominal speed
PHASE_OFFSET = 0.3  # trial starts at 30% of a right-foot cycle
HEEL_HEIGHT = 0.05
SWING_CLEARANCE = 0.08
PELVIS_HEIGHT = 0.95
COM_FOLLOW_BELT = 0.6  # share of the stance belt's extra speed passed to the pelvis
COM_RECENTER_S = 1.0  # time constant of the pelvis drifting back after the drag
PLATFORM_LAG_S = 0.25
WBAM_GAIN = 0.035

# unit vectors (x forward, y left) for the compass directions
_DIR_VEC = {
    d: (math.cos(math.radians(45 * k)), -math.sin(math.radians(45 * k)))
    for k, d in enumerate(DIRECTIONS)
}
_NOMINAL_MAGNITUDE = {"trip": 3.0, "slip": 3.0, "translation": 0.10}
_PELVIS_OFFSETS = np.array([
    [0.10, -0.12, 0.0],   # rasis
    [0.10, 0.12, 0.0],    # lasis
    [-0.10, -0.05, 0.0],  # rpsis
    [-0.10, 0.05, 0.0],   # lpsis
])


@dataclass(frozen=True)
class GaitModelParams:
    walking_speed: float = 1.25
    stride_duration: float = 1.0
    sample_rate: float = 100.0
    step_width: float = 0.2
    noise_sd: float = 0.003
    seed: int = 0
    trial_duration: float = 30.0

    def __post_init__(self):
        for f in ("walking_speed", "stride_duration", "sample_rate", "step_width", "trial_duration"):
            if not getattr(self, f) > 0:
                raise InvalidSpec(f"{f} must be positive")
        if self.noise_sd < 0:
            raise InvalidSpec("noise_sd must be >= 0")

    @classmethod
    def from_dict(cls, doc: dict) -> "GaitModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown gait parameter(s): {', '.join(sorted(unknown))}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "GaitModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    onset_phase: float = 10.0
    onset_stride: int = 15
    magnitude: Optional[float] = None
    duration_s: Optional[float] = None
    direction: Optional[str] = None

    def resolved(self) -> "PerturbationSpec":
        """Fill per-kind defaults and validate."""
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}")
        mag = _NOMINAL_MAGNITUDE[self.kind] if self.magnitude is None else self.magnitude
        if not mag > 0:
            raise InvalidSpec("magnitude must be positive")
        if self.kind == "translation":
            dur = 0.3 if self.duration_s is None else self.duration_s
            direction = self.direction or "N"
            if direction not in DIRECTIONS:
                raise InvalidSpec(f"unknown direction {direction!r}")
        else:
            dur = 0.5 if self.duration_s is None else self.duration_s
            direction = None
            if not 0 <= self.onset_phase < 100 * STANCE_FRACTION:
                raise InvalidSpec("belt perturbations need the right foot in stance at onset")
        if not dur > 0:
            raise InvalidSpec("duration_s must be positive")
        if not 0 <= self.onset_phase < 100:
            raise InvalidSpec("onset_phase must lie in [0, 100)")
        if self.onset_stride < 0:
            raise InvalidSpec("onset_stride must be >= 0")
        return PerturbationSpec(self.kind, self.onset_phase, self.onset_stride, mag, dur, direction)


def _cycloid(u):
    return u - np.sin(2 * np.pi * u) / (2 * np.pi)


def _foot(p, params: GaitModelParams):
    """Template heel trajectory for a foot whose heel strike is at p = 0."""
    T = params.stride_duration
    v = params.walking_speed
    L = v * T * STANCE_FRACTION
    stance = p < STANCE_FRACTION
    u = np.clip((p - STANCE_FRACTION) / (1 - STANCE_FRACTION), 0.0, 1.0)
    x = np.where(stance, L / 2 - v * T * p, -L / 2 + L * _cycloid(u))
    z = np.where(stance, HEEL_HEIGHT, HEEL_HEIGHT + SWING_CLEARANCE * (1 - np.cos(2 * np.pi * u)) / 2)
    return x, z, stance


def _grf(p):
    """Smoothed stance pulse; reaches 20 N exactly at the heel-strike sample."""
    ramp = 0.04
    lead = 0.008
    q = np.mod(p + lead, 1.0)
    width = STANCE_FRACTION + lead
    up = np.clip(q / ramp, 0, 1)
    down = np.clip((width - q) / ramp, 0, 1)
    env = np.where(q < width, np.minimum(up, down), 0.0)
    return BODY_WEIGHT_N * (1 - np.cos(np.pi * env)) / 2


def _lowpass(x, tau_s: float, rate: float):
    a = 1.0 - math.exp(-1.0 / (tau_s * rate))
    y = np.empty_like(x)
    acc = 0.0
    for i, v in enumerate(x):
        acc += a * (v - acc)
        y[i] = acc
    return y


def belt_velocity_delta(tau, magnitude: float, duration_s: float,
                        return_rate: float = BELT_RETURN_RATE):
    """Belt speed change (m/s, positive = magnitude direction) after onset."""
    tau = np.asarray(tau, dtype=float)
    peak = magnitude * duration_s
    rising = magnitude * np.clip(tau, 0, None)
    falling = np.maximum(peak - return_rate * (tau - duration_s), 0.0)
    return np.where(tau < 0, 0.0, np.where(tau <= duration_s, rising, falling))


def onset_sample_for(params: GaitModelParams, spec: PerturbationSpec) -> int:
    T = params.stride_duration
    t = (spec.onset_stride + 1 - PHASE_OFFSET) * T + spec.onset_phase / 100.0 * T
    return int(round(t * params.sample_rate))


def generate_trial(params: GaitModelParams = GaitModelParams(),
                   spec: Optional[PerturbationSpec] = None,
                   trial_id: str = "") -> TrialRecording:
    """Build one trial.  Identical (params, spec) give bit-identical output."""
    rate = params.sample_rate
    T = params.stride_duration
    n = int(round(params.trial_duration * rate))
    t = np.arange(n) / rate
    p = np.mod(t / T + PHASE_OFFSET, 1.0)
    pl = np.mod(p - 0.5, 1.0)

    rx, rz, r_stance = _foot(p, params)
    lx, lz, _ = _foot(pl, params)
    half_w = params.step_width / 2
    com = np.stack([
        0.01 * np.sin(4 * np.pi * p),
        -0.025 * np.sin(2 * np.pi * p),
        PELVIS_HEIGHT + 0.02 * np.cos(4 * np.pi * p),
    ], axis=1)
    rheel = np.stack([rx, np.full(n, -half_w), rz], axis=1)
    lheel = np.stack([lx, np.full(n, half_w), lz], axis=1)
    wbam_sag = 0.01 * np.sin(2 * np.pi * p)
    wbam_front = 0.008 * np.sin(4 * np.pi * p + 1.0)

    label = None
    if spec is not None:
        spec = spec.resolved()
        onset = onset_sample_for(params, spec)
        if onset >= n:
            raise InvalidSpec("onset falls after the end of the trial")
        tau = (np.arange(n) - onset) / rate
        if spec.kind in ("trip", "slip"):
            sign = 1.0 if spec.kind == "trip" else -1.0
            dv = sign * belt_velocity_delta(tau, spec.magnitude, spec.duration_s)
            disp = _belt_displacement(dv * r_stance, r_stance, p, rate)
            rheel[:, 0] += disp
            com[:, 0] += _com_drag(dv * r_stance, rate)
            ux, uy = 1.0, 0.0
        else:
            ux, uy = _DIR_VEC[spec.direction]
            s = np.clip(tau / spec.duration_s, 0, 1)
            d = spec.magnitude * (1 - np.cos(np.pi * s)) / 2 * (tau >= 0)
            lagged = _lowpass(d, PLATFORM_LAG_S, rate)
            for heel in (rheel, lheel):
                heel[:, 0] += ux * d
                heel[:, 1] += uy * d
            com[:, 0] += ux * lagged
            com[:, 1] += uy * lagged
        intensity = spec.magnitude / _NOMINAL_MAGNITUDE[spec.kind]
        g = np.where(tau > 0, (tau / 0.2) * np.exp(1 - tau / 0.2), 0.0)
        wbam_sag += WBAM_GAIN * intensity * abs(ux) * g
        wbam_front += WBAM_GAIN * intensity * abs(uy) * g
        label = PerturbationLabel(onset, spec.kind, spec.direction, float(spec.magnitude))

    markers = np.empty((n, 8, 3))
    markers[:, 0:4, :] = com[:, None, :] + _PELVIS_OFFSETS[None, :, :]
    markers[:, MARKER_INDEX["rheel"]] = rheel
    markers[:, MARKER_INDEX["lheel"]] = lheel
    toe = np.array([0.18, 0.0, -0.02])
    markers[:, MARKER_INDEX["rtoe"]] = rheel + toe
    markers[:, MARKER_INDEX["ltoe"]] = lheel + toe

    rng = np.random.default_rng(params.seed)
    if params.noise_sd > 0:
        markers = markers + rng.normal(0.0, params.noise_sd, markers.shape)
    grf_r = _grf(p) + rng.normal(0.0, GRF_NOISE_N, n)
    grf_l = _grf(pl) + rng.normal(0.0, GRF_NOISE_N, n)
    wbam_sag = wbam_sag + rng.normal(0.0, WBAM_NOISE, n)
    wbam_front = wbam_front + rng.normal(0.0, WBAM_NOISE, n)

    return TrialRecording(rate, markers, grf_r, grf_l, wbam_sag, wbam_front, label,
                          trial_id or _default_id(params, spec))


def _com_drag(v_contact, rate):
    """Pelvis displacement dragged by the stance belt, re-centring slowly."""
    out = np.zeros_like(v_contact)
    dt = 1.0 / rate
    for i in range(1, v_contact.shape[0]):
        prev = out[i - 1]
        out[i] = prev + COM_FOLLOW_BELT * v_contact[i] * dt - prev * dt / COM_RECENTER_S
    return out


def _belt_displacement(v_contact, stance, p, rate):
    """Integrate the heel's extra belt velocity during stance (trapezoid,
    exact for the piecewise-linear belt profile) and unwind it over swing."""
    n = v_contact.shape[0]
    disp = np.zeros(n)
    u = np.clip((p - STANCE_FRACTION) / (1 - STANCE_FRACTION), 0.0, 1.0)
    carried = 0.0
    for i in range(1, n):
        if stance[i]:
            if stance[i - 1]:
                disp[i] = disp[i - 1] + (v_contact[i - 1] + v_contact[i]) / (2 * rate)
            else:
                disp[i] = 0.0
        else:
            if stance[i - 1]:
                carried = disp[i - 1]
            disp[i] = carried * (1 - _cycloid(u[i]))
    return disp


def _default_id(params: GaitModelParams, spec: Optional[PerturbationSpec]) -> str:
    if spec is None:
        return f"steady_s{params.seed}"
    mag = "%g" % spec.magnitude
    d = f"_{spec.direction}" if spec.direction else ""
    return f"{spec.kind}_m{mag}_p{spec.onset_phase:g}{d}_s{params.seed}"


MagnitudeAxis = Union[Sequence[float], Dict[str, Sequence[float]]]


def generate_matrix(base: GaitModelParams, kinds: Sequence[str], magnitudes: MagnitudeAxis,
                    phases: MagnitudeAxis, onset_stride: int = 15,
                    directions: Optional[Sequence[str]] = None) -> List[TrialRecording]:
    """Cartesian product of perturbation cells plus one steady trial per kind.

    ``magnitudes`` and ``phases`` are either one list used for every kind or
    a mapping from kind to its own list (belt magnitudes in m/s²,
    translation in metres; phases in percent of the right-foot cycle).
    Translation cells cycle through ``directions`` (default all eight).
    Every trial gets its own seed derived from ``base.seed``.
    """
    if not kinds or not magnitudes or not phases:
        raise InvalidSpec("every matrix axis needs at least one value")
    directions = list(directions or DIRECTIONS)
    trials = []
    seed = base.seed * 10007
    cell = 0
    for kind in kinds:
        mags = magnitudes[kind] if isinstance(magnitudes, dict) else magnitudes
        for mag in mags:
            for ph in (phases[kind] if isinstance(phases, dict) else phases):
                direction = directions[cell % len(directions)] if kind == "translation" else None
                spec = PerturbationSpec(kind, ph, onset_stride, mag, direction=direction)
                params = _with_seed(base, seed)
                trials.append(generate_trial(params, spec))
                seed += 1
                cell += 1
        params = _with_seed(base, seed)
        trials.append(generate_trial(params, None, f"steady_{kind}_s{seed}"))
        seed += 1
    return trials


def _with_seed(base: GaitModelParams, seed: int) -> GaitModelParams:
    doc = asdict(base)
    doc["seed"] = seed
    return GaitModelParams(**doc)


BENCHMARK_MAGNITUDES = {
    "trip": (2.0, 3.0, 4.0),
    "slip": (2.0, 3.0, 4.0),
    "translation": (0.05, 0.10, 0.15),
}
# Belt onsets stay in early/mid stance so the pulse acts on a loaded foot;
# platform translations cover the whole cycle.
BENCHMARK_PHASES = {
    "trip": (0.0, 10.0, 20.0, 30.0),
    "slip": (0.0, 10.0, 20.0, 30.0),
    "translation": (5.0, 25.0, 45.0, 65.0, 85.0),
}


def benchmark_matrix(seed: int = 0, **overrides) -> List[TrialRecording]:
    """The 42-trial desk benchmark (39 perturbed cells + 3 steady trials)."""
    base = GaitModelParams(seed=seed, **overrides)
    return generate_matrix(base, list(KINDS), BENCHMARK_MAGNITUDES, BENCHMARK_PHASES)
