import numpy as np
import pytest

from divattn.core import make_rng

# Lines appended by the acceptance suite; echoed once more at the end of the
# session so they survive output capture.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return make_rng(1234)


def random_pmfs(rng, rows, L):
    return rng.dirichlet(np.ones(L), size=rows)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
