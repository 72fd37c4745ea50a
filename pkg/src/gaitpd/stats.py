"""Rolling per-phase-bin mean / standard deviation / coefficient of variation."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch
from .kinematics import N_STATES, STATE_NAMES

DEFAULT_WINDOW_CYCLES = 10
DEFAULT_EPSILON = 1e-6


def cov(mean, sd, epsilon: float = DEFAULT_EPSILON):
    """Coefficient of variation ``sd / max(|mean|, epsilon)``.

    The floor keeps C finite for states whose mean crosses zero.
    """
    return np.asarray(sd) / np.maximum(np.abs(mean), epsilon)


def band_statistics(window: np.ndarray, epsilon: float = DEFAULT_EPSILON):
    """Mean, population sd and C over axis 0 of a ``(cycles, bins, states)`` stack."""
    mean = window.mean(axis=0)
    sd = window.std(axis=0)
    return mean, sd, cov(mean, sd, epsilon)


@dataclass(frozen=True, eq=False)
class PhaseBandModel:
    """Statistics of the most recent ``window_cycles`` accepted cycles.

    Immutable: :meth:`push` returns a new model.  ``mean``, ``sd`` and ``cov``
    are ``None`` until at least one cycle has been pushed.
    """

    window_cycles: int = DEFAULT_WINDOW_CYCLES
    bins: int = 100
    n_states: int = N_STATES
    epsilon: float = DEFAULT_EPSILON
    cycles: tuple = ()
    mean: Optional[np.ndarray] = None
    sd: Optional[np.ndarray] = None
    cov: Optional[np.ndarray] = None

    @property
    def valid(self) -> bool:
        return len(self.cycles) == self.window_cycles

    def push(self, cycle_matrix) -> "PhaseBandModel":
        m = np.asarray(cycle_matrix, dtype=float)
        if m.shape != (self.bins, self.n_states):
            raise DimensionMismatch(
                f"cycle matrix {m.shape} != ({self.bins}, {self.n_states})"
            )
        cycles = (self.cycles + (m,))[-self.window_cycles:]
        mean, sd, c = band_statistics(np.stack(cycles), self.epsilon)
        return PhaseBandModel(self.window_cycles, self.bins, self.n_states,
                              self.epsilon, cycles, mean, sd, c)

    @classmethod
    def from_cycles(cls, matrices: Sequence[np.ndarray], **kwargs) -> "PhaseBandModel":
        model = cls(**kwargs)
        for m in matrices:
            model = model.push(m)
        return model

    def to_csv(self) -> str:
        """``bin,state,mean,sd,cov`` rows for plotting/debugging."""
        if self.mean is None:
            raise ValueError("model is empty")
        out = io.StringIO()
        out.write("bin,state,mean,sd,cov\n")
        names = STATE_NAMES if self.n_states == N_STATES else [str(i) for i in range(self.n_states)]
        for b in range(self.bins):
            for s in range(self.n_states):
                out.write(f"{b},{names[s]},{self.mean[b, s]:.9g},{self.sd[b, s]:.9g},{self.cov[b, s]:.9g}\n")
        return out.getvalue()


def push_cycle(model: PhaseBandModel, cycle_matrix) -> PhaseBandModel:
    return model.push(cycle_matrix)
