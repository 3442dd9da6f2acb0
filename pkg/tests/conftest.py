from importlib import resources

import pytest

from mlst.graph import LabeledGraph, read_instance

# toy node ids
T1, T2, T3, S1, S2, S3 = range(6)
RED, GREEN, BLUE, YELLOW = range(4)


def toy_path():
    return resources.files("mlst") / "data" / "toy.mlst"


@pytest.fixture
def toy():
    return read_instance(toy_path())


@pytest.fixture
def single_label():
    edges = ((0, 1, 0), (1, 2, 0), (2, 3, 0), (0, 3, 0), (1, 3, 0))
    return LabeledGraph(4, edges, 1, frozenset({0, 2}))


def mvca_trap() -> LabeledGraph:
    """Terminals 0 and 1, optimum 2 via the path 0-2-1 (labels 1, 2).

    Decoy label 0 is a star over Steiner nodes 3..8 and label 3 merges the
    most components once the decoy is in, so greedy commits to the route
    0-3-star-4-1 and ends with labels {0, 3, 4}.
    """
    edges = [
        (0, 2, 1), (1, 2, 2),
        (3, 4, 0), (3, 5, 0), (3, 6, 0), (3, 7, 0), (3, 8, 0),
        (0, 3, 3), (0, 5, 3), (9, 10, 3), (2, 10, 3),
        (1, 4, 4),
    ]
    return LabeledGraph(11, tuple(edges), 5, frozenset({0, 1}))


# -- acceptance report --------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
