import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

from eploom import evolve  # noqa: E402


@pytest.fixture(scope="session")
def calibrated():
    """Result of the default calibration scan (shared; the scan takes a few seconds)."""
    return evolve.calibrate_omega()


@pytest.fixture(scope="session")
def omega_star(calibrated):
    return calibrated.omega


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def full_cycle(n=257):
    return np.linspace(0.0, 2.0 * math.pi, n)


def pytest_terminal_summary(terminalreporter):
    """Collect the one-line verdicts recorded by the acceptance tests."""
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        if getattr(rep, "when", None) == "call"
        for key, value in getattr(rep, "user_properties", ())
        if key == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
