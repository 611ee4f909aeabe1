import re

import numpy as np
import pytest

from attitude6d.augment import random_unit_quaternion

DEG = np.pi / 180.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_quats(rng, n):
    return np.array([random_unit_quaternion(rng) for _ in range(n)])


def z_rotation(angle):
    return np.array([np.cos(angle / 2), 0.0, 0.0, np.sin(angle / 2)])


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
            terminalreporter.write_line(ACCEPTANCE[key])
