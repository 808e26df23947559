import numpy as np
import pytest

from roughell.grid import BoxGrid

_CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    _CRITERIA[number] = line
    print(line)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def box2():
    """Whole-space box with a non-periodic x^1 axis and one periodic x' axis."""
    return BoxGrid.whole_space((-4.0, 4.0), [(-np.pi, np.pi)], (65, 32))
