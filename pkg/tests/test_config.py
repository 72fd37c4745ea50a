import json

import pytest

from gaitpd.config import RunConfig, defaults_text
from gaitpd.errors import ConfigError


def test_defaults_round_trip():
    cfg = RunConfig()
    assert cfg.detector.threshold_phi == 0.125
    assert RunConfig.from_dict(json.loads(defaults_text())).to_dict() == cfg.to_dict()


def test_sections_parse():
    cfg = RunConfig.from_json(json.dumps({
        "detector": {"threshold_phi": 0.2},
        "gait": {"seed": 4},
        "perturbation": {"kind": "trip", "onset_phase": 20},
        "sweep": {"step": 0.01},
    }))
    assert cfg.detector.threshold_phi == 0.2 and cfg.detector.band_k == 2.0
    assert cfg.gait.seed == 4
    assert cfg.perturbation.kind == "trip"
    assert cfg.sweep.step == 0.01


@pytest.mark.parametrize("doc", [
    {"detectr": {}},
    {"detector": {"threshold": 0.1}},
    {"gait": {"seed": 1, "colour": "red"}},
    {"perturbation": {"onset_phase": 10}},
    {"detector": []},
    [],
])
def test_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(doc)


def test_invalid_json():
    with pytest.raises(ConfigError):
        RunConfig.from_json("{not json")
