import math
import sys

import pytest

from zswkb.potential import FourierPotential


@pytest.fixture(scope="session")
def cos_v():
    return FourierPotential.cosine()


@pytest.fixture(scope="session")
def shifted_v():
    # (2 + cos x) / 3
    return FourierPotential((2 / 3, 1 / 3))


@pytest.fixture(scope="session")
def free_v():
    return FourierPotential((0.0,))


TWO_PI = 2 * math.pi


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for name in sorted(lines, key=lambda n: int(n.split("-")[1])):
            terminalreporter.write_line(lines[name])
