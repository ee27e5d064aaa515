import numpy as np
import pytest

from trustwebrank import kernels
from trustwebrank.graph import RandomGraphSpec, TrustGraph, generate_random_graph

BACKENDS = ["python"] + (["cython"] if kernels.compiled_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get_backend(request.param)


def cycle2(w=1.0):
    g = TrustGraph(2)
    g.add_edge(0, 1, w).add_edge(1, 0, w)
    return g


def chain(n, w=1.0):
    g = TrustGraph(n)
    for i in range(n - 1):
        g.add_edge(i, i + 1, w)
    return g


def random_weighted(n, d, seed):
    """Random symmetric structure with independent uniform weights."""
    g = generate_random_graph(RandomGraphSpec(n, d, seed))
    rng = np.random.default_rng(seed + 1000)
    for i in range(n):
        for j in g.neighbours(i):
            g.add_edge(i, j, float(rng.uniform(0.05, 1.0)))
    return g


def random_directed(n, p, seed):
    rng = np.random.default_rng(seed)
    g = TrustGraph(n)
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                g.add_edge(i, j, 1.0)
    return g


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
