import numpy as np
import pytest

from millpdm.dataset import write_ai4i
from millpdm.simulate import simulate_ai4i

import acceptance_log


@pytest.fixture(scope="session")
def small_ai4i():
    return simulate_ai4i(1500, seed=7)


@pytest.fixture(scope="session")
def surrogate():
    return simulate_ai4i()


@pytest.fixture
def ai4i_csv(tmp_path, small_ai4i):
    return write_ai4i(small_ai4i, tmp_path / "ai4i.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.RESULTS):
        terminalreporter.write_line(acceptance_log.line(number))
