import numpy as np
import pytest

from sparsescale.field import GridSpec


@pytest.fixture
def grid16():
    return GridSpec(16)


@pytest.fixture
def grid32():
    return GridSpec(32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report: criterion number -> (passed, detail)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")
