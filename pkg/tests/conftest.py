import math

import pytest

from mmnoma.allocation import EffectivePair
from mmnoma.rate import SystemConfig

# Lines recorded by the acceptance suite, echoed in the terminal summary so
# they survive output capture.
ACCEPTANCE_LINES = []


@pytest.fixture
def ref_pair():
    return EffectivePair.from_gains(0.8, 0.5, -0.25, 0.4, 32)


@pytest.fixture
def ref_cfg():
    return SystemConfig(n_antennas=32, total_power=100.0, noise_power=1.0,
                        rate_floor_1=3.0, rate_floor_2=3.0, phase_sweep=20)


def random_pair(rng, n, ratio=(0.05, 0.95)):
    a = rng.uniform(0.2, 1.0)
    b = a * rng.uniform(*ratio)
    return EffectivePair.from_gains(math.sqrt(a), math.sqrt(b), -0.3, 0.5, n)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
