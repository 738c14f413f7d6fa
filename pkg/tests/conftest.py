import numpy as np
import pytest

from inclusionlab import build_rectangle_mesh


@pytest.fixture(scope="session")
def unit16():
    return build_rectangle_mesh((0.0, 1.0, 0.0, 1.0), 16, 16)


@pytest.fixture(scope="session")
def unit32():
    return build_rectangle_mesh((0.0, 1.0, 0.0, 1.0), 32, 32)


@pytest.fixture(scope="session")
def unit64():
    return build_rectangle_mesh((0.0, 1.0, 0.0, 1.0), 64, 64)


@pytest.fixture(scope="session")
def unit128():
    return build_rectangle_mesh((0.0, 1.0, 0.0, 1.0), 128, 128)


@pytest.fixture(scope="session")
def unit256():
    return build_rectangle_mesh((0.0, 1.0, 0.0, 1.0), 256, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """``report(number, ok, detail)`` prints and records one acceptance line, then asserts ``ok``."""
    lines = request.config.stash[_ACCEPTANCE]

    def report(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append((number, line))
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
