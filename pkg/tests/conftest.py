import numpy as np
import pytest

from gaitpd.pipeline import prepare
from gaitpd.synth import GaitModelParams, PerturbationSpec, benchmark_matrix, generate_trial


@pytest.fixture(scope="session")
def steady_trial():
    return generate_trial(GaitModelParams(seed=11), None, "steady")


@pytest.fixture(scope="session")
def slip_trial():
    spec = PerturbationSpec("slip", onset_phase=10, magnitude=3.0)
    return generate_trial(GaitModelParams(seed=12), spec, "slip")


@pytest.fixture(scope="session")
def benchmark_trials():
    return benchmark_matrix(seed=0)


@pytest.fixture(scope="session")
def benchmark_prepared(benchmark_trials):
    return [prepare(t) for t in benchmark_trials]


def make_frame(rheel, lheel, com=(0.0, 0.0, 1.0)):
    """One (8, 3) marker frame with all four pelvis markers at ``com``."""
    f = np.zeros((8, 3))
    f[0:4] = com
    f[4] = rheel
    f[5] = lheel
    f[6] = np.asarray(rheel) + (0.2, 0, 0)
    f[7] = np.asarray(lheel) + (0.2, 0, 0)
    return f


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
