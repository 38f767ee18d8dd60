import numpy as np
import pytest

from bandctl.gsp import Graph
from bandctl.random_graph import generate_er, rng_stream

# acceptance lines collected during the run and repeated in the terminal summary
ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def k2():
    return Graph(2, [(0, 1)])


@pytest.fixture
def p3():
    return Graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def k3():
    return Graph(3, [(0, 1), (0, 2), (1, 2)])


def random_weighted_graph(rng, n, n_edges, connected=False):
    """Random graph with ``n_edges`` edges and weights in [0.5, 1.5]."""
    iu, ju = np.triu_indices(n, k=1)
    while True:
        pick = rng.choice(len(iu), size=n_edges, replace=False)
        g = Graph(n, np.column_stack([iu[pick], ju[pick]]), rng.uniform(0.5, 1.5, n_edges))
        if not connected or g.is_connected():
            return g


@pytest.fixture
def small_er():
    return generate_er(12, 0.4, rng_stream(11, 0))
