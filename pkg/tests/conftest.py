import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rmfanova.design import RMDataset  # noqa: E402


def random_dataset(rng, group_sizes, m, p, scale=1.0):
    n = sum(group_sizes)
    return RMDataset(scale * rng.standard_normal((n, m, p)), tuple(group_sizes))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
