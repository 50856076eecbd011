import numpy as np
import pytest

from posetrss.poset import build_poset

LABELS = ("a", "b", "c", "d", "e")
# five elements with two variables each
FIVE_ELEMENTS = np.array([[0, 1], [2, 1], [1, 2], [3, 3], [0, 4]], dtype=float)

# the eight extensions, each listed top-down (highest first)
FIVE_EXTENSIONS_TOP_DOWN = [
    "dcbea",
    "dceba",
    "decba",
    "edcba",
    "dbcea",
    "dbeca",
    "debca",
    "edbca",
]


@pytest.fixture
def five_elements():
    return FIVE_ELEMENTS.copy()


@pytest.fixture
def five_poset():
    return build_poset(FIVE_ELEMENTS, labels=LABELS)


def names(order):
    return "".join(LABELS[i] for i in order)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
