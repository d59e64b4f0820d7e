import numpy as np
import pytest

from mgcn.graph import Graph

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}

FOUR_NODE_EDGES = [(0, 1), (1, 2), (2, 3), (0, 2)]


def four_node_graph(seed=7, d=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(4, d))
    return Graph(4, FOUR_NODE_EDGES, x, node_labels=np.array([0, 1, 1, 0]))


@pytest.fixture
def four_node():
    return four_node_graph()


def random_graph(rng, n, p):
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = np.argwhere(upper)
    return Graph(n, edges, rng.standard_normal((n, 2)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
