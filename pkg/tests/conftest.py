"""Shared desk-scale fixtures: small enough to decode in milliseconds."""

import numpy as np
import pytest

from uraspread import AlphaCurve, PowerProfile, SystemParams

# One verdict line per acceptance criterion, filled in by test_acceptance
# and echoed after the run so the verdicts survive pytest's capture.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def desk_params() -> SystemParams:
    return SystemParams(k_a=4, b=30, n_s=32, n_c=128, list_size=16, b_s=8)


@pytest.fixture(scope="session")
def desk_profile() -> PowerProfile:
    return PowerProfile(group_sizes=(256,), power_levels=(10.0,))


@pytest.fixture(scope="session")
def flat05() -> AlphaCurve:
    return AlphaCurve.constant(0.05)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
