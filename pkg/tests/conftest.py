import numpy as np
import pytest

from roipose.geometry import CameraIntrinsics
from roipose.synth import builtin_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def k_c():
    return CameraIntrinsics(500.0, 500.0, 320.0, 240.0)


@pytest.fixture
def cube():
    return builtin_model("cube")


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary whether it passes or not."""
    def record(name, passed, detail):
        _ACCEPTANCE.append((name, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
