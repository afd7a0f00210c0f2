import numpy as np
import pytest

from vamct.core import make_angles
from vamct.phantom import generate_phantom, tooth_phantom

# (criterion, name, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {name}: {detail}")


@pytest.fixture(scope="session")
def angles360():
    return make_angles(360, 0.5)


@pytest.fixture(scope="session")
def angles180():
    return make_angles(180, 1.0)


@pytest.fixture(scope="session")
def small_tooth():
    """64 x 64 x 48 tooth phantom volume and its spec."""
    spec = tooth_phantom(64, 48)
    return spec, generate_phantom(spec, 64, 64, 48)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
