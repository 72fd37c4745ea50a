"""JSON run configuration.  Unknown keys are rejected at every level."""

from __future__ import annotations

import json
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import Dict, List, Optional

from .detector import DetectorConfig
from .errors import ConfigError
from .pipeline import ProcessingConfig
from .synth import BENCHMARK_MAGNITUDES, BENCHMARK_PHASES, GaitModelParams, PerturbationSpec


@dataclass(frozen=True)
class SweepRange:
    t_min: float = 0.01
    t_max: float = 1.0
    step: float = 0.001


@dataclass(frozen=True)
class WbamConfig:
    n_cycles: int = 3
    k: float = 4.0
    mode: str = "or"  # "or" | "per_plane"


@dataclass(frozen=True)
class MatrixConfig:
    kinds: List[str] = field(default_factory=lambda: ["trip", "slip", "translation"])
    magnitudes: Dict[str, List[float]] = field(
        default_factory=lambda: {k: list(v) for k, v in BENCHMARK_MAGNITUDES.items()})
    phases: Dict[str, List[float]] = field(
        default_factory=lambda: {k: list(v) for k, v in BENCHMARK_PHASES.items()})
    onset_stride: int = 15


@dataclass(frozen=True)
class AnalysisConfig:
    pca_standardize: bool = True
    pca_k: int = 2


@dataclass(frozen=True)
class Paths:
    input: Optional[str] = None
    label: Optional[str] = None
    out: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    detector: DetectorConfig = DetectorConfig()
    processing: ProcessingConfig = ProcessingConfig()
    gait: GaitModelParams = GaitModelParams()
    perturbation: Optional[PerturbationSpec] = None
    matrix: MatrixConfig = MatrixConfig()
    sweep: SweepRange = SweepRange()
    wbam: WbamConfig = WbamConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    sample_rate: float = 100.0
    paths: Paths = Paths()

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        _check_keys(cls, doc, "config")
        kwargs = {}
        for name, sub in _SECTIONS.items():
            if name in doc:
                if name == "perturbation" and doc[name] is None:
                    kwargs[name] = None
                    continue
                kwargs[name] = _build(sub, doc[name], name)
        if "sample_rate" in doc:
            kwargs["sample_rate"] = float(doc["sample_rate"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "detector": DetectorConfig,
    "processing": ProcessingConfig,
    "gait": GaitModelParams,
    "perturbation": PerturbationSpec,
    "matrix": MatrixConfig,
    "sweep": SweepRange,
    "wbam": WbamConfig,
    "analysis": AnalysisConfig,
    "paths": Paths,
}


def _check_keys(cls, doc: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _build(cls, doc, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be a JSON object")
    _check_keys(cls, doc, where)
    required = [f.name for f in fields(cls)
                if f.default is MISSING and f.default_factory is MISSING and f.name not in doc]
    if required:
        raise ConfigError(f"{where} is missing {', '.join(required)}")
    try:
        return cls(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from None


def defaults_text() -> str:
    """Default configuration as indented JSON (shown by ``--help``)."""
    return json.dumps(RunConfig().to_dict(), indent=1, sort_keys=True)
