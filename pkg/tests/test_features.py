import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab.errors import DomainError
from commlab.features import (
    FEATURE_NAMES,
    PairFeatureVector,
    cosine_from,
    cosine_similarity,
    cut_from,
    cut_size,
    features_from,
    pair_features,
    write_feature_csv,
)
from commlab.graph import Graph
from commlab.ppr import PprCache, PprParams

from conftest import clique_pairs, from_edge_pairs


def ref_neighbors(g, u):
    return {int(x) for x in g.neighbors(u)}


def ref_cosine(g, u, v):
    a, b = ref_neighbors(g, u), ref_neighbors(g, v)
    if not a or not b:
        return 0.0
    return len(a & b) / np.sqrt(len(a) * len(b))


def ref_cut(g, u, v):
    nu = ref_neighbors(g, u) - {v}
    nv = ref_neighbors(g, v) - {u}
    count = 0
    for x, y in map(tuple, g.edges()):
        if (x in nu and y in nv) or (y in nu and x in nv):
            count += 1
    return count


def test_cosine_examples():
    # u=0, v=1, a,b,c = 2,3,4
    g = from_edge_pairs(5, [(0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)])
    assert cosine_similarity(g, 0, 1) == pytest.approx(1.0)
    g = from_edge_pairs(5, [(0, 2), (0, 3), (1, 3), (1, 4)])
    assert cosine_similarity(g, 0, 1) == pytest.approx(0.5)
    g = from_edge_pairs(5, [(0, 2), (1, 3)])
    assert cosine_similarity(g, 0, 1) == 0.0
    g = Graph.from_edges(3, [0], [1])
    assert cosine_similarity(g, 0, 2) == 0.0


def test_cut_examples():
    # path a-u-x-v-b: a=0 u=1 x=2 v=3 b=4
    path = from_edge_pairs(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    assert cut_size(path, 1, 3) == 0
    # two triangles sharing edge (x, y); apexes u, v: x=0 y=1 u=2 v=3
    g = from_edge_pairs(4, [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)])
    assert cut_size(g, 2, 3) == 1
    assert cut_size(Graph.from_edges(4, [], []), 0, 1) == 0


def test_distinct_precondition(triangle):
    for f in (cosine_similarity, cut_size):
        with pytest.raises(DomainError):
            f(triangle, 1, 1)


def all_graphs(n):
    pairs = list(itertools.combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        chosen = [p for i, p in enumerate(pairs) if mask >> i & 1]
        yield from_edge_pairs(n, chosen) if chosen else Graph.from_edges(n, [], [])


def test_exhaustive_small_graphs_match_reference():
    for n in (2, 3, 4, 5):
        for g in all_graphs(n):
            for u, v in itertools.permutations(range(n), 2):
                assert cut_size(g, u, v) == ref_cut(g, u, v)
                assert cosine_similarity(g, u, v) == pytest.approx(ref_cosine(g, u, v), abs=0)


random_graphs = st.integers(2, 30).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=4 * n)))


@given(random_graphs)
@settings(max_examples=120, deadline=None)
def test_reference_equivalence_and_symmetry(spec):
    n, pairs = spec
    g = from_edge_pairs(n, pairs) if pairs else Graph.from_edges(n, [], [])
    for v in range(min(n, 6)):
        cuts = cut_from(g, v)
        cos = cosine_from(g, v)
        for u in range(n):
            if u == v:
                continue
            c = cut_size(g, u, v)
            assert c == ref_cut(g, u, v) == cut_size(g, v, u) == cuts[u]
            assert c <= g.degree(u) * g.degree(v)
            assert cosine_similarity(g, u, v) == pytest.approx(ref_cosine(g, u, v), abs=1e-15)
            assert cosine_similarity(g, u, v) == cosine_similarity(g, v, u)
            assert cos[u] == pytest.approx(ref_cosine(g, u, v), abs=1e-15)
            assert 0.0 <= cos[u] <= 1.0 + 1e-15


def test_same_block_features_positive():
    from commlab.sbm import SbmParams, generate_sbm

    g, _ = generate_sbm(SbmParams(200, 20, 1.0, 0.01, 4))
    cache = PprCache(g)
    f = pair_features(g, cache, 0, 7)
    assert f.ppr_uv > 0 and f.ppr_vu > 0 and f.cosine > 0 and f.cut > 0


def test_disconnected_pair():
    g = from_edge_pairs(8, clique_pairs(range(4)) + clique_pairs(range(4, 8)))
    params = PprParams(0.15, 1e-4)
    f = pair_features(g, PprCache(g, params), 0, 5)
    assert f.ppr_uv <= params.r_max * g.degree(5)
    assert f.ppr_vu <= params.r_max * g.degree(0)
    assert f.cosine == 0.0 and f.cut == 0


def test_automorphism_gives_equal_ppr():
    # 4-cycle: swapping 0 and 2 is an automorphism
    g = from_edge_pairs(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    f = pair_features(g, PprCache(g, PprParams(0.15, 1e-9)), 0, 2)
    assert f.ppr_uv == pytest.approx(f.ppr_vu, abs=1e-12)


def test_batch_rows_equal_pair_features(small_sbm):
    g, _ = small_sbm
    cache = PprCache(g)
    for v in (0, 123):
        rows = features_from(g, cache, v)
        assert np.all(rows[v] == 0)
        for u in (1, 5, 200, 399):
            if u != v:
                assert np.array_equal(rows[u], pair_features(g, cache, v, u).as_array())


class CountingGraph(Graph):
    """Records every node whose adjacency is read through ``neighbors``."""

    def neighbors(self, u):
        self.touched.add(int(u))
        return super().neighbors(u)


def test_features_are_local():
    from commlab.sbm import SbmParams, balanced_q, generate_sbm

    base, _ = generate_sbm(SbmParams(20_000, 20, 0.3, balanced_q(20_000, 20, 0.3), 2))
    g = CountingGraph(base.offsets, base.neighbor_ids, base.labels)
    object.__setattr__(g, "touched", set())
    u, v = 0, 1
    cosine_similarity(g, u, v)
    cut_size(g, u, v)
    two_hop = {u, v}
    for x in (u, v):
        for y in base.neighbors(x):
            two_hop.add(int(y))
            two_hop.update(int(z) for z in base.neighbors(y))
    assert g.touched <= two_hop
    assert len(two_hop) < base.node_count // 20

    # the push reads adjacency only of nodes holding residual mass
    from commlab.ppr import push_state

    params = PprParams()
    p, r, _ = push_state(base, u, params)
    support = np.flatnonzero((p > 0) | (r > 0))
    assert len(support) <= 1 / (params.alpha * params.r_max)


def test_feature_csv(tmp_path):
    path = tmp_path / "f.csv"
    write_feature_csv(path, [(0, 1, PairFeatureVector(0.1, 0.2, 0.5, 3), True)])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["u", "v", *FEATURE_NAMES, "label"]
    assert rows[1] == ["0", "1", "0.1", "0.2", "0.5", "3", "1"]
