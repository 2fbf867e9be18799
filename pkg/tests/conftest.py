import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lymdo.profiles import DnnProfile, LayerProfile

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_profile(macs, params, feats, name="synthetic") -> DnnProfile:
    return DnnProfile(name, tuple(LayerProfile(m, p, f) for m, p, f in zip(macs, params, feats)))


@pytest.fixture
def tiny_profile():
    # three real layers behind the input
    return make_profile([0, 5, 7, 11], [0, 40, 60, 80], [100, 50, 200, 30])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting ---------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
