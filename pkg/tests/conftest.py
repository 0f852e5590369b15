import sys
import numpy as np
import pytest
from hypothesis import strategies as st

from agmonlab.graph_core import build_graph, gen_family, gen_lattice_box, well


def random_graph(rng, n=None, q_range=(-1.0, 1.0), p=0.3):
    """Random graph with b in (0, 2], m in (0.1, 2], q in q_range; connected via a random spanning path."""
    n = int(rng.integers(2, 51)) if n is None else n
    perm = rng.permutation(n)
    pairs = {tuple(sorted((int(perm[i]), int(perm[i + 1])))) for i in range(n - 1)}
    extra = rng.random((n, n)) < p / max(1, n // 5)
    for i, j in zip(*np.nonzero(np.triu(extra, 1))):
        pairs.add((int(i), int(j)))
    edges = [(i, j, float(rng.uniform(1e-3, 2.0))) for i, j in sorted(pairs)]
    m = rng.uniform(0.1, 2.0, n)
    q = rng.uniform(*q_range, n)
    return build_graph(edges, m, q)


@st.composite
def graphs(draw, max_n=50, q_range=(-1.0, 1.0)):
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(2, max_n))
    return random_graph(np.random.default_rng(seed), n, q_range)


@st.composite
def graph_and_rng(draw, max_n=50, q_range=(-1.0, 1.0)):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(2, max_n))
    return random_graph(rng, n, q_range), rng


@pytest.fixture
def P2():
    return gen_family("path", n=2)


@pytest.fixture
def P3():
    return gen_family("path", n=3)


@pytest.fixture
def C4():
    return gen_family("cycle", n=4)


@pytest.fixture(scope="session")
def z_well():
    return gen_lattice_box(1, 80, q=well(-1.5))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
