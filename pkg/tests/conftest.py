import numpy as np
import pytest
from hypothesis import settings

from mixedindep.transforms import MixedSample, WeightParams

settings.register_profile("repo", derandomize=True, deadline=None)
settings.load_profile("repo")

# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def hand_sample():
    # two rows: X = (1, 2), Y = (0, 1)
    return MixedSample(np.array([1.0, 2.0]), np.array([0, 1]))


@pytest.fixture
def unit_weight():
    return WeightParams([1.0], [1.0])


def random_sample(rng, n, r1, r2):
    x = rng.exponential(1.0, (n, r1)) + 0.01
    y = rng.poisson(2.0, (n, r2))
    return MixedSample(x, y)


def random_weight(rng, r1, r2):
    return WeightParams(rng.uniform(0.2, 5.0, r1), rng.uniform(0.2, 5.0, r2))
