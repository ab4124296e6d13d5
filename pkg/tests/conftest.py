import numpy as np
import pytest

from rangevol.moments import build_lambda_table, load_table


@pytest.fixture(scope="session")
def small_table():
    """Cheap table for unit tests: m up to 64 at 10^5 paths."""
    return build_lambda_table([1, 2, 3, 4, 5, 8, 10, 13, 16, 20, 32, 64], paths=100_000, seed=11)


@pytest.fixture(scope="session")
def default_table():
    return load_table()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion; printed in the terminal summary."""
    lines = []
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
