"""PCA of state trajectories and aggregation of per-trial scores."""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .detector import TrialScore
from .errors import DegenerateAllConstant, EmptyRows, TooFewSamples


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Iterates until the off-diagonal Frobenius norm is below
    ``tol * ||a||_F``.  Returns ``(eigenvalues, eigenvectors)`` unsorted,
    eigenvectors in columns.
    """
    A = np.array(a, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("matrix must be symmetric")
    A = (A + A.T) / 2
    V = np.eye(n)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    else:
        warnings.warn("Jacobi iteration hit max_sweeps before converging")
    return np.diag(A).copy(), V


@dataclass
class PcaResult:
    components: np.ndarray  # (k, n_columns), rows orthonormal
    explained_variance: np.ndarray
    total_variance: float
    scores: np.ndarray  # (samples, k)
    mean: np.ndarray
    scale: np.ndarray
    kept: np.ndarray  # boolean mask of columns that entered the decomposition

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance

    def scores_csv(self, names: Optional[Sequence[str]] = None) -> str:
        k = self.scores.shape[1]
        out = io.StringIO()
        out.write("sample," + ",".join(f"pc{j + 1}" for j in range(k)) + "\n")
        for i, row in enumerate(self.scores):
            out.write(f"{i}," + ",".join(f"{v:.9g}" for v in row) + "\n")
        return out.getvalue()


def pca(states, k: int = 2, standardize: bool = True) -> PcaResult:
    """Principal components of a samples x states matrix.

    Columns with zero variance are dropped (with a warning).  With
    ``standardize`` every remaining column is scaled to unit population
    variance first.  Each component's largest-magnitude loading is made
    positive.
    """
    X = np.asarray(states, dtype=float)
    n, m = X.shape
    if n < m + 1:
        raise TooFewSamples(f"{n} samples for {m} columns; need at least {m + 1}")
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}]")
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    kept = sd > 0
    if not kept.any():
        raise DegenerateAllConstant("every column is constant")
    if not kept.all():
        warnings.warn(f"dropping {int((~kept).sum())} constant column(s) before PCA")
    scale = np.where(kept, sd, 1.0) if standardize else np.ones(m)
    Z = ((X - mean) / scale)[:, kept]
    C = Z.T @ Z / n
    vals, vecs = jacobi_eigh(C)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    k_eff = min(k, int(kept.sum()))
    vecs = vecs[:, :k_eff]
    for j in range(k_eff):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    components = np.zeros((k_eff, m))
    components[:, kept] = vecs.T
    return PcaResult(
        components=components,
        explained_variance=np.maximum(vals[:k_eff], 0.0),
        total_variance=float(np.trace(C)),
        scores=Z @ vecs,
        mean=mean,
        scale=scale,
        kept=kept,
    )


@dataclass
class EvaluationReport:
    detector: str
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    delay_mean: Optional[float]
    delay_sd: Optional[float]
    rows: List[dict] = field(default_factory=list)

    @property
    def confusion(self) -> Dict[str, int]:
        return {"TP": self.tp, "FP": self.fp, "TN": self.tn, "FN": self.fn}

    def summary(self) -> str:
        delay = "n/a" if self.delay_mean is None else f"{self.delay_mean:.1f}±{self.delay_sd:.1f}%"
        return (f"{self.detector}: accuracy {100 * self.accuracy:.1f}% "
                f"(TP {self.tp} FP {self.fp} TN {self.tn} FN {self.fn}), delay {delay}")

    def to_dict(self) -> dict:
        return {
            "detector": self.detector,
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "delay_mean_pct": self.delay_mean,
            "delay_sd_pct": self.delay_sd,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def rows_csv(self) -> str:
        cols = ["trial_id", "kind", "perturbed", "tp", "fp", "tn", "fn", "delay_pct", "detection_sample"]
        out = io.StringIO()
        out.write(",".join(cols) + "\n")
        for r in self.rows:
            out.write(",".join("" if r.get(c) is None else str(r.get(c)) for c in cols) + "\n")
        return out.getvalue()


def evaluate(rows: Sequence[TrialScore], detector: str = "kinematic") -> EvaluationReport:
    """Aggregate per-trial scores; delay statistics use TPs only."""
    rows = list(rows)
    if not rows:
        raise EmptyRows("no per-trial rows to evaluate")
    tp = sum(r.tp for r in rows)
    fp = sum(r.fp for r in rows)
    tn = sum(r.tn for r in rows)
    fn = sum(r.fn for r in rows)
    total = tp + fp + tn + fn
    delays = [r.delay_pct for r in rows if r.tp and r.delay_pct is not None]
    mean = sd = None
    if delays:
        mean = math.fsum(delays) / len(delays)
        sd = math.sqrt(math.fsum((d - mean) ** 2 for d in delays) / len(delays))
    ordered = sorted((r.as_row() for r in rows), key=lambda r: r["trial_id"])
    return EvaluationReport(detector, tp, fp, tn, fn, (tp + tn) / total if total else math.nan,
                            mean, sd, ordered)


def plane_average(reports: Sequence[EvaluationReport]) -> dict:
    """Accuracy and delay averaged over per-plane reports."""
    accs = [r.accuracy for r in reports]
    delays = [r.delay_mean for r in reports if r.delay_mean is not None]
    return {
        "accuracy": math.fsum(accs) / len(accs),
        "delay_mean_pct": math.fsum(delays) / len(delays) if delays else None,
        "planes": [r.detector for r in reports],
    }
