"""COM estimate, local-frame relative positions and velocities.

Axis convention: x anteroposterior (+ forward), y mediolateral (+ left),
z vertical (+ up).
"""

from __future__ import annotations

import numpy as np

from .errors import MissingMarker, TooShort
from .ingest import LHEEL, PELVIS, RHEEL, TrialRecording

STATE_NAMES = (
    "rheel_rel_com_x", "rheel_rel_com_y", "rheel_rel_com_z",
    "lheel_rel_com_x", "lheel_rel_com_y", "lheel_rel_com_z",
    "com_rel_midfeet_x", "com_rel_midfeet_y",
    "rheel_vel_x", "rheel_vel_y", "rheel_vel_z",
    "lheel_vel_x", "lheel_vel_y", "lheel_vel_z",
    "com_vel_x", "com_vel_y",
)
N_STATES = len(STATE_NAMES)
STATE_INDEX = {name: i for i, name in enumerate(STATE_NAMES)}
POSITION_STATES = slice(0, 8)
VELOCITY_STATES = slice(8, 16)

VELOCITY_FRAMES = ("global", "relative")


def compute_com(markers) -> np.ndarray:
    """Mean of the four pelvis markers.

    Accepts one ``(8, 3)`` frame or a ``(n, 8, 3)`` stack.
    """
    markers = np.asarray(markers, dtype=float)
    pelvis = markers[..., PELVIS, :]
    if np.isnan(pelvis).any():
        raise MissingMarker("pelvis marker missing")
    return (pelvis[..., 0, :] + pelvis[..., 1, :] + pelvis[..., 2, :] + pelvis[..., 3, :]) / 4.0


def relative_states(markers, com) -> np.ndarray:
    """The 8 position states (heels relative to COM, COM relative to mid-feet).

    Works on a single frame (returns shape ``(8,)``) or a stack.
    """
    markers = np.asarray(markers, dtype=float)
    com = np.asarray(com, dtype=float)
    rheel = markers[..., RHEEL, :]
    lheel = markers[..., LHEEL, :]
    if np.isnan(rheel).any() or np.isnan(lheel).any():
        raise MissingMarker("heel marker missing")
    midfeet = (rheel[..., :2] + lheel[..., :2]) / 2.0
    return np.concatenate(
        [rheel - com, lheel - com, com[..., :2] - midfeet], axis=-1
    )


def moving_average(series, window: int) -> np.ndarray:
    """Centred moving average; the window shrinks symmetrically near the ends."""
    x = np.asarray(series, dtype=float)
    if window <= 1:
        return x.copy()
    if window % 2 == 0:
        raise ValueError("smooth_window must be odd")
    n = x.shape[0]
    h = window // 2
    idx = np.arange(n)
    half = np.minimum(np.minimum(idx, n - 1 - idx), h)
    csum = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    width = (2 * half + 1).reshape((n,) + (1,) * (x.ndim - 1))
    return (csum[idx + half + 1] - csum[idx - half]) / width


def differentiate(series, sample_rate: float, smooth_window: int = 1) -> np.ndarray:
    """Time derivative by central differences (one-sided at the ends).

    The position series is optionally smoothed with a centred moving
    average of ``smooth_window`` samples first.  Works along axis 0.
    """
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 3:
        raise TooShort("differentiation needs at least 3 samples")
    if smooth_window > 1:
        x = moving_average(x, smooth_window)
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) * (sample_rate / 2.0)
    v[0] = (x[1] - x[0]) * sample_rate
    v[-1] = (x[-1] - x[-2]) * sample_rate
    return v


def build_state_sequence(trial: TrialRecording, smooth_window: int = 5,
                         velocity_frame: str = "global") -> np.ndarray:
    """One 16-state row per frame, in ``STATE_NAMES`` order.

    Velocities are of the global heel and COM positions unless
    ``velocity_frame == "relative"``, in which case the relative position
    states are differentiated instead.
    """
    if velocity_frame not in VELOCITY_FRAMES:
        raise ValueError(f"velocity_frame must be one of {VELOCITY_FRAMES}")
    com = compute_com(trial.markers)
    positions = relative_states(trial.markers, com)
    rate = trial.sample_rate
    if velocity_frame == "global":
        tracked = np.concatenate(
            [trial.markers[:, RHEEL, :], trial.markers[:, LHEEL, :], com[:, :2]], axis=1
        )
    else:
        tracked = positions
    velocities = differentiate(tracked, rate, smooth_window)
    return np.concatenate([positions, velocities], axis=1)
