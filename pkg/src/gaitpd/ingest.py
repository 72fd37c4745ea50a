"""Trial CSV reading/writing, perturbation sidecars and marker gap filling.

Marker data is held as a ``(n_frames, 8, 3)`` float array.  A missing
coordinate is stored as NaN; nothing else in a trial may be non-finite.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    GapAtBoundary,
    MalformedHeader,
    NonFiniteForce,
    RaggedRows,
    TimestampMismatch,
)

MARKERS = ("rasis", "lasis", "rpsis", "lpsis", "rheel", "lheel", "rtoe", "ltoe")
AXES = ("x", "y", "z")
MARKER_INDEX = {name: i for i, name in enumerate(MARKERS)}
PELVIS = (0, 1, 2, 3)
RHEEL = MARKER_INDEX["rheel"]
LHEEL = MARKER_INDEX["lheel"]

MARKER_COLUMNS = tuple(f"{m}_{a}" for m in MARKERS for a in AXES)
GRF_COLUMNS = ("grf_r_z", "grf_l_z")
WBAM_COLUMNS = ("wbam_sag", "wbam_front")
HEADER = ("t",) + MARKER_COLUMNS + GRF_COLUMNS

KINDS = ("trip", "slip", "translation")
DIRECTIONS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")

DEFAULT_MAX_GAP = 25
FLOAT_FMT = "%.9g"


@dataclass(frozen=True)
class PerturbationLabel:
    onset_sample: int
    kind: str
    direction: Optional[str]
    magnitude: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.direction is not None and self.direction not in DIRECTIONS:
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.onset_sample < 0:
            raise ValueError("onset_sample must be >= 0")

    def to_json(self) -> str:
        return json.dumps(
            {
                "onset_sample": int(self.onset_sample),
                "kind": self.kind,
                "direction": self.direction,
                "magnitude": float(self.magnitude),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PerturbationLabel":
        doc = json.loads(text)
        return cls(
            onset_sample=int(doc["onset_sample"]),
            kind=doc["kind"],
            direction=doc.get("direction"),
            magnitude=float(doc["magnitude"]),
        )


@dataclass
class TrialRecording:
    """Time-synchronised marker, force and optional WBAM channels of one trial."""

    sample_rate: float
    markers: np.ndarray
    grf_right_z: np.ndarray
    grf_left_z: np.ndarray
    wbam_sagittal: Optional[np.ndarray] = None
    wbam_frontal: Optional[np.ndarray] = None
    perturbation: Optional[PerturbationLabel] = None
    trial_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.markers = np.asarray(self.markers, dtype=float)
        self.grf_right_z = np.asarray(self.grf_right_z, dtype=float)
        self.grf_left_z = np.asarray(self.grf_left_z, dtype=float)
        if self.wbam_sagittal is not None:
            self.wbam_sagittal = np.asarray(self.wbam_sagittal, dtype=float)
        if self.wbam_frontal is not None:
            self.wbam_frontal = np.asarray(self.wbam_frontal, dtype=float)
        self.validate()

    def validate(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        n = self.markers.shape[0]
        if self.markers.shape != (n, len(MARKERS), 3):
            raise ValueError(f"markers must have shape (n, 8, 3), got {self.markers.shape}")
        if n < 2:
            raise ValueError("a trial needs at least 2 frames")
        for name in ("grf_right_z", "grf_left_z", "wbam_sagittal", "wbam_frontal"):
            arr = getattr(self, name)
            if arr is None:
                continue
            if arr.shape != (n,):
                raise ValueError(f"{name} length {arr.shape} != frame count {n}")
        for name in ("grf_right_z", "grf_left_z"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NonFiniteForce(f"{name} contains non-finite values")
        if np.isinf(self.markers).any():
            raise ValueError("marker coordinates must be finite or missing")
        if self.perturbation is not None and self.perturbation.onset_sample >= n:
            raise ValueError("perturbation onset lies beyond the last frame")

    @property
    def n_frames(self) -> int:
        return self.markers.shape[0]

    @property
    def has_wbam(self) -> bool:
        return self.wbam_sagittal is not None and self.wbam_frontal is not None

    def frame(self, i: int) -> np.ndarray:
        """The (8, 3) marker frame at sample ``i``."""
        return self.markers[i]

    def marker(self, name: str) -> np.ndarray:
        return self.markers[:, MARKER_INDEX[name], :]


def _cell(text: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    return float(text)


def parse_trial(csv_text: str, sample_rate: float, trial_id: str = "",
                perturbation: Optional[PerturbationLabel] = None) -> TrialRecording:
    """Parse a trial CSV.  Empty cells become NaN (missing)."""
    reader = csv.reader(io.StringIO(csv_text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MalformedHeader("empty CSV") from None
    missing = [c for c in HEADER if c not in header]
    if missing:
        raise MalformedHeader(f"missing required column(s): {', '.join(missing)}")
    has_wbam = all(c in header for c in WBAM_COLUMNS)
    if any(c in header for c in WBAM_COLUMNS) and not has_wbam:
        raise MalformedHeader("wbam_sag and wbam_front must appear together")
    col = {name: i for i, name in enumerate(header)}

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRows(f"line {lineno}: {len(row)} cells, header has {len(header)}")
        try:
            rows.append([_cell(c) for c in row])
        except ValueError as exc:
            raise RaggedRows(f"line {lineno}: unparseable cell ({exc})") from None
    if len(rows) < 2:
        raise RaggedRows("a trial needs at least 2 data rows")
    data = np.array(rows, dtype=float)

    for name in GRF_COLUMNS:
        if not np.all(np.isfinite(data[:, col[name]])):
            raise NonFiniteForce(f"column {name} has an empty or non-finite cell")

    t = data[:, col["t"]]
    if np.isfinite(t).all():
        expected = t[0] + np.arange(len(t)) / sample_rate
        if np.any(np.diff(t) <= 0) or np.max(np.abs(t - expected)) > 0.5 / sample_rate:
            raise TimestampMismatch(f"t column inconsistent with sample_rate {sample_rate} Hz")
    else:
        raise TimestampMismatch("t column has empty cells")

    markers = data[:, [col[c] for c in MARKER_COLUMNS]].reshape(len(rows), len(MARKERS), 3)
    return TrialRecording(
        sample_rate=float(sample_rate),
        markers=markers,
        grf_right_z=data[:, col["grf_r_z"]],
        grf_left_z=data[:, col["grf_l_z"]],
        wbam_sagittal=data[:, col["wbam_sag"]] if has_wbam else None,
        wbam_frontal=data[:, col["wbam_front"]] if has_wbam else None,
        perturbation=perturbation,
        trial_id=trial_id,
    )


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else FLOAT_FMT % v


def serialize_trial(trial: TrialRecording) -> str:
    """Inverse of :func:`parse_trial` (floats written with 9 significant digits)."""
    header = list(HEADER)
    if trial.has_wbam:
        header += list(WBAM_COLUMNS)
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    flat = trial.markers.reshape(trial.n_frames, -1)
    for i in range(trial.n_frames):
        cells = [_fmt(i / trial.sample_rate)]
        cells += [_fmt(v) for v in flat[i]]
        cells += [_fmt(trial.grf_right_z[i]), _fmt(trial.grf_left_z[i])]
        if trial.has_wbam:
            cells += [_fmt(trial.wbam_sagittal[i]), _fmt(trial.wbam_frontal[i])]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def read_trial(path, sample_rate: float, label_path=None) -> TrialRecording:
    with open(path, newline="") as fh:
        text = fh.read()
    label = None
    if label_path is not None:
        with open(label_path) as fh:
            label = PerturbationLabel.from_json(fh.read())
    return parse_trial(text, sample_rate, trial_id=str(path), perturbation=label)


@dataclass(frozen=True)
class GapReport:
    """A run of missing samples that was left unrepaired."""

    start: int
    length: int
    reason: str = "too_long"
    channel: str = ""


def _missing_runs(missing: np.ndarray):
    idx = np.flatnonzero(np.diff(np.concatenate(([0], missing.astype(np.int8), [0]))))
    return list(zip(idx[::2], idx[1::2]))


def fill_gaps(series, max_gap: int = DEFAULT_MAX_GAP):
    """Interpolate interior runs of missing (NaN) samples.

    Each gap of at most ``max_gap`` samples is filled with the cubic through
    the two known samples on either side, falling back to a straight line
    when fewer than two are known on a side.  Longer gaps are left as NaN
    and returned in the report.

    Returns
    -------
    filled : ndarray
    oversized : list of GapReport
    """
    x = np.array(series, dtype=float)
    missing = np.isnan(x)
    if x.size == 0 or not missing.any():
        return x, []
    if missing[0] or missing[-1]:
        raise GapAtBoundary("series starts or ends with a missing sample")

    out = x.copy()
    oversized = []
    for start, stop in _missing_runs(missing):
        length = stop - start
        if length > max_gap:
            oversized.append(GapReport(int(start), int(length)))
            continue
        a, b = start - 1, stop
        gap = np.arange(start, stop, dtype=float)
        if a - 1 >= 0 and b + 1 < x.size and not (missing[a - 1] or missing[b + 1]):
            knots = np.array([a - 1, a, b, b + 1], dtype=float)
            vals = x[[a - 1, a, b, b + 1]]
            filled = np.zeros_like(gap)
            for j in range(4):
                basis = np.ones_like(gap)
                for m in range(4):
                    if m != j:
                        basis *= (gap - knots[m]) / (knots[j] - knots[m])
                filled += vals[j] * basis
        else:
            w = (gap - a) / (b - a)
            filled = x[a] + w * (x[b] - x[a])
        out[start:stop] = filled
    return out, oversized


def fill_trial_gaps(trial: TrialRecording, max_gap: int = DEFAULT_MAX_GAP):
    """Gap-fill every marker coordinate of a trial.

    Channels with missing samples at either end are left untouched and
    reported with reason ``"boundary"``.
    """
    markers = trial.markers.copy()
    report = []
    for m, name in enumerate(MARKERS):
        for a, axis in enumerate(AXES):
            channel = f"{name}_{axis}"
            try:
                filled, gaps = fill_gaps(markers[:, m, a], max_gap)
            except GapAtBoundary:
                report.append(GapReport(0, 0, "boundary", channel))
                continue
            markers[:, m, a] = filled
            report.extend(replace(g, channel=channel) for g in gaps)
    return replace(trial, markers=markers), report
