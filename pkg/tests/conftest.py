import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from transchaos.space import Mode, SpaceSpec  # noqa: E402
from transchaos.weights import WeightFunction, certify_admissibility  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="session")
def spike():
    return WeightFunction.spike_train()


@pytest.fixture(scope="session")
def expw():
    return WeightFunction.integrable_exp()


@pytest.fixture(scope="session")
def spike_cert(spike):
    return certify_admissibility(spike, 60.0, 0.01)


@pytest.fixture(scope="session")
def exp_cert(expw):
    return certify_admissibility(expw, 40.0, 0.01)


@pytest.fixture
def make_spec():
    def make(weight, x_max=10.0, step=0.01, mode=Mode.LP, p=1.0):
        return SpaceSpec(Mode(mode), weight, x_max, step, p)
    return make
