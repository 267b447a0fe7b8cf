import math

import pytest
from hypothesis import settings

from thzisl.config import load
from thzisl.core_model import ArrayConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def baseline():
    return load()


@pytest.fixture
def baseline_array():
    return ArrayConfig(n_tx=64, n_rx=64, spacing_wavelengths=0.5, steer_angle_rad=math.radians(30.0),
                       carrier_hz=140e9, bandwidth_hz=20e9, range_m=1e6)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance verdict line; it is echoed now and again in the terminal summary."""
    def _report(label: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
