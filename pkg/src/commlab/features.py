"""Structural pair features: PPR in both directions, neighborhood cosine and
neighborhood cut size.

Cut convention: with ``N(u)`` the neighbors of ``u`` other than ``v`` (and
vice versa), count each edge ``{x, y}`` once when one endpoint lies in
``N(u)`` and the other in ``N(v)``.  Nodes in both neighborhoods count on
both sides, so an edge inside the intersection crosses.
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass

import numpy as np

from .errors import DomainError
from .graph import Graph
from .ppr import PprCache

FEATURE_NAMES = ("ppr_uv", "ppr_vu", "cosine", "cut")


@dataclass(frozen=True)
class PairFeatureVector:
    ppr_uv: float
    ppr_vu: float
    cosine: float
    cut: int

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def _distinct(u, v):
    if u == v:
        raise DomainError("pair features need two distinct nodes")


def _merge_count(a, b) -> int:
    """Size of the intersection of two sorted id arrays."""
    i = j = count = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            count += 1
            i += 1
            j += 1
        elif a[i] < b[j]:
            i += 1
        else:
            j += 1
    return count


def cosine_similarity(g: Graph, u, v) -> float:
    _distinct(u, v)
    nu, nv = g.neighbors(u), g.neighbors(v)
    if len(nu) == 0 or len(nv) == 0:
        return 0.0
    return _merge_count(nu, nv) / np.sqrt(len(nu) * len(nv))


def cut_size(g: Graph, u, v) -> int:
    _distinct(u, v)
    nu = g.neighbors(u)
    nv = g.neighbors(v)
    nu = nu[nu != v]
    nv = nv[nv != u]
    union = np.union1d(nu, nv)
    count = 0
    for x in union:
        x_in_u = _contains(nu, x)
        x_in_v = _contains(nv, x)
        nbrs = g.neighbors(x)
        for y in nbrs[nbrs > x]:
            if (x_in_u and _contains(nv, y)) or (x_in_v and _contains(nu, y)):
                count += 1
    return count


def _contains(sorted_ids, x) -> bool:
    i = np.searchsorted(sorted_ids, x)
    return bool(i < len(sorted_ids) and sorted_ids[i] == x)


def pair_features(g: Graph, ppr_cache: PprCache, u, v) -> PairFeatureVector:
    _distinct(u, v)
    return PairFeatureVector(
        ppr_cache.score(u, v),
        ppr_cache.score(v, u),
        cosine_similarity(g, u, v),
        cut_size(g, u, v),
    )


def common_neighbor_counts(g: Graph, v) -> np.ndarray:
    """``|N(u) ∩ N(v)|`` for every node ``u``."""
    indicator = np.zeros(g.node_count)
    indicator[g.neighbors(v)] = 1.0
    return g.adjacency @ indicator


def cosine_from(g: Graph, v) -> np.ndarray:
    deg = g.degrees.astype(float)
    denom = np.sqrt(deg * deg[v])
    common = common_neighbor_counts(g, v)
    return np.divide(common, denom, out=np.zeros(g.node_count), where=denom > 0)


def cut_from(g: Graph, v) -> np.ndarray:
    """``cut_size(g, u, v)`` for every ``u`` at once (the ``u == v`` slot is 0).

    Ordered crossings ``x ∈ N(u), y ∈ N(v)`` come from two sparse products,
    corrected for ``v ∈ N(u)`` and ``u ∈ N(v)``; edges inside
    ``N(u) ∩ N(v)`` are counted in both orders there and subtracted once.
    """
    A = g.adjacency
    deg = g.degrees.astype(np.int64)
    common = common_neighbor_counts(g, v)
    ordered = A @ common
    adjacent = np.zeros(g.node_count)
    adjacent[g.neighbors(v)] = 1.0
    ordered -= adjacent * (deg[v] + deg - adjacent)

    # every edge {x, y} inside N(v) lies inside N(u) ∩ N(v) for u ∈ N(x) ∩ N(y)
    inside = np.zeros(g.node_count)
    nv = g.neighbors(v)
    for x in nv:
        nx_ = g.neighbors(x)
        for y in nx_[nx_ > x]:
            if _contains(nv, y):
                shared = np.intersect1d(nx_, g.neighbors(y), assume_unique=True)
                inside[shared] += 1.0
    inside[v] = 0.0
    out = np.rint(ordered - inside).astype(np.int64)
    out[v] = 0
    return out


def features_from(g: Graph, ppr_cache: PprCache, v) -> np.ndarray:
    """Feature rows for the pairs ``(v, u)`` over all ``u``, shape ``(n, 4)``.

    Row ``u`` equals ``pair_features(g, ppr_cache, v, u).as_array()`` for
    ``u != v``; row ``v`` is zero.
    """
    out = np.empty((g.node_count, 4))
    out[:, 0] = ppr_cache.vector(v).dense(g.node_count)
    out[:, 1] = ppr_cache.column(v)
    out[:, 2] = cosine_from(g, v)
    out[:, 3] = cut_from(g, v)
    out[v] = 0.0
    return out


def write_feature_csv(path, rows) -> None:
    """Rows are ``(u, v, PairFeatureVector, label)`` tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["u", "v", *FEATURE_NAMES, "label"])
        for u, v, feats, label in rows:
            w.writerow([u, v, repr(feats.ppr_uv), repr(feats.ppr_vu), repr(feats.cosine), feats.cut, int(label)])
