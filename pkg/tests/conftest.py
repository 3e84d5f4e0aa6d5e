import os

import pytest
from hypothesis import HealthCheck, settings

from vndnsim.config import Config
from vndnsim.mobility import VehicleTrace

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def small_trace(n=6, horizon=12.0, rate=50):
    """A handful of overlapping vehicles; cheap enough for integration tests."""
    rows = []
    for vid in range(n):
        enter = round(0.4 * vid, 3)
        rows.append(VehicleTrace(vid, enter, min(horizon, round(enter + 6.0 + vid, 3)), 8.6, rate + 5 * vid))
    return rows


@pytest.fixture
def tiny_trace():
    return small_trace()


@pytest.fixture
def short_config():
    return Config(horizon_s=12.0)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (passed, detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
