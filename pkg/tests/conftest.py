import io

import numpy as np
import pytest

from commlab.graph import Graph, communities_from_lists, load_edge_list


def graph_of(text):
    return load_edge_list(io.StringIO(text))


def from_edge_pairs(n, pairs):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return Graph.from_edges(n, pairs[:, 0], pairs[:, 1])


def clique_pairs(nodes):
    nodes = list(nodes)
    return [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]


@pytest.fixture
def triangle():
    return graph_of("0 1\n1 2\n2 0\n")


@pytest.fixture
def two_cliques():
    """Two disjoint 10-cliques with their block communities."""
    g = from_edge_pairs(20, clique_pairs(range(10)) + clique_pairs(range(10, 20)))
    return g, communities_from_lists([range(10), range(10, 20)], 20)


@pytest.fixture(scope="session")
def small_sbm():
    from commlab.sbm import SbmParams, balanced_q, generate_sbm

    p = 0.5
    return generate_sbm(SbmParams(400, 20, p, balanced_q(400, 20, p), 3))
