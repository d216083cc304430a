"""Immutable undirected graphs in compressed adjacency form, plus ground-truth
communities.

Input formats follow SNAP: an edge list has one ``u v`` pair per line and a
community file has one whitespace-separated community per line.  Lines that
start with ``#`` are comments.  External labels are kept as strings and
remapped to dense ids ``0..n-1`` in order of first appearance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParseError

log = logging.getLogger(__name__)


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph.

    ``neighbor_ids[offsets[u]:offsets[u+1]]`` is the sorted neighbor list of
    ``u``.  Instances are never mutated after construction.
    """

    offsets: np.ndarray
    neighbor_ids: np.ndarray
    labels: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "offsets", _frozen(self.offsets, np.int64))
        object.__setattr__(self, "neighbor_ids", _frozen(self.neighbor_ids, np.int32))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.node_count)))
        elif len(self.labels) != self.node_count:
            raise DomainError("label table length does not match node count")

    @classmethod
    def from_edges(cls, n, src, dst, labels=None) -> "Graph":
        """Build from parallel endpoint arrays.

        Self-loops are dropped, both directions are added and duplicates
        collapse to a single edge.
        """
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise DomainError("endpoint arrays differ in length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise DomainError("edge endpoint outside [0, n)")
        keep = src != dst
        src, dst = src[keep], dst[keep]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        key = np.unique(rows * n + cols)
        rows, cols = np.divmod(key, n)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
        return cls(offsets, cols, labels)

    @property
    def node_count(self) -> int:
        return len(self.offsets) - 1

    @property
    def edge_count(self) -> int:
        return len(self.neighbor_ids) // 2

    @cached_property
    def degrees(self) -> np.ndarray:
        return _frozen(np.diff(self.offsets), np.int64)

    def degree(self, u) -> int:
        return int(self.offsets[u + 1] - self.offsets[u])

    def neighbors(self, u) -> np.ndarray:
        return self.neighbor_ids[self.offsets[u]:self.offsets[u + 1]]

    def has_edge(self, u, v) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        n = self.node_count
        data = np.ones(len(self.neighbor_ids), dtype=np.float64)
        return sp.csr_matrix((data, self.neighbor_ids, self.offsets), shape=(n, n))

    @cached_property
    def index_of(self) -> dict:
        return {label: i for i, label in enumerate(self.labels)}

    def edges(self):
        """Upper-triangle edge array of shape (m, 2) with u < v."""
        rows = np.repeat(np.arange(self.node_count), self.degrees)
        mask = rows < self.neighbor_ids
        return np.column_stack([rows[mask], self.neighbor_ids[mask]])

    def permuted_to(self, labels) -> "Graph":
        """Same graph with nodes reordered to follow ``labels``.

        Edge-list files cannot carry isolated nodes or the original id order,
        so round trips compare through this.
        """
        labels = tuple(labels)
        if sorted(labels) != sorted(self.labels):
            raise DomainError("label sets differ")
        target = {x: i for i, x in enumerate(labels)}
        new_id = np.array([target[x] for x in self.labels], dtype=np.int64)
        e = self.edges()
        return Graph.from_edges(len(labels), new_id[e[:, 0]], new_id[e[:, 1]], labels)

    @cached_property
    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(self.offsets.tobytes())
        h.update(self.neighbor_ids.tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.neighbor_ids, other.neighbor_ids)
            and self.labels == other.labels
        )

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class CommunitySet:
    """Possibly overlapping communities over the nodes of one graph."""

    communities: tuple
    node_count: int
    skipped_labels: int = 0

    def __post_init__(self):
        comms = tuple(_frozen(np.unique(np.asarray(c, dtype=np.int64)), np.int64) for c in self.communities)
        for c in comms:
            if c.size and (c[0] < 0 or c[-1] >= self.node_count):
                raise DomainError("community references a node outside the graph")
        object.__setattr__(self, "communities", comms)

    @cached_property
    def membership(self) -> tuple:
        members = [[] for _ in range(self.node_count)]
        for ci, c in enumerate(self.communities):
            for u in c:
                members[u].append(ci)
        return tuple(frozenset(m) for m in members)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.communities], dtype=np.int64)

    @property
    def small_communities(self) -> list:
        """Indices of communities with fewer than two members (no positive pairs)."""
        return [i for i, s in enumerate(self.sizes) if s < 2]

    def partners(self, v) -> np.ndarray:
        """Sorted ids sharing at least one community with ``v``, excluding ``v``."""
        ms = self.membership[v]
        if not ms:
            return np.empty(0, dtype=np.int64)
        out = np.unique(np.concatenate([self.communities[c] for c in ms]))
        return out[out != v]

    def partner_mask(self, v) -> np.ndarray:
        mask = np.zeros(self.node_count, dtype=bool)
        mask[self.partners(v)] = True
        return mask

    def partner_counts(self) -> np.ndarray:
        """Number of same-community partners of every node."""
        if all(len(self.membership[u]) <= 1 for u in range(self.node_count)):
            counts = np.zeros(self.node_count, dtype=np.int64)
            for c in self.communities:
                counts[c] = len(c) - 1
            return counts
        return np.array([len(self.partners(u)) for u in range(self.node_count)], dtype=np.int64)


def same_community(cs: CommunitySet, u, v) -> bool:
    """True iff ``u`` and ``v`` share at least one community."""
    if u == v:
        raise DomainError("same_community needs two distinct nodes")
    if not (0 <= u < cs.node_count and 0 <= v < cs.node_count):
        raise DomainError("node id out of range")
    return not cs.membership[u].isdisjoint(cs.membership[v])


def _data_lines(text_stream):
    for lineno, line in enumerate(text_stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line.split()


def load_edge_list(text_stream: Iterable[str]) -> Graph:
    """Parse a SNAP-style undirected edge list."""
    index = {}
    src, dst = [], []
    for lineno, tokens in _data_lines(text_stream):
        if len(tokens) != 2:
            raise ParseError(f"expected 2 tokens, got {len(tokens)}", lineno)
        a, b = tokens
        src.append(index.setdefault(a, len(index)))
        dst.append(index.setdefault(b, len(index)))
    labels = tuple(index)
    return Graph.from_edges(len(labels), src, dst, labels)


def load_communities(text_stream: Iterable[str], graph: Graph, strict=False) -> CommunitySet:
    """Parse a SNAP-style community file against ``graph``'s label table.

    Unknown labels are skipped and counted unless ``strict`` is set, in
    which case they raise, as do members with no incident edges.
    """
    index = graph.index_of
    communities = []
    skipped = 0
    for lineno, tokens in _data_lines(text_stream):
        members = []
        for tok in tokens:
            u = index.get(tok)
            if u is None:
                if strict:
                    raise ParseError(f"label {tok!r} not in graph", lineno)
                skipped += 1
                continue
            if strict and graph.degree(u) == 0:
                raise ParseError(f"label {tok!r} is an isolated node", lineno)
            members.append(u)
        communities.append(members)
    if skipped:
        log.warning("skipped %d community labels absent from the graph", skipped)
    return CommunitySet(tuple(communities), graph.node_count, skipped)


def with_label_order(graph: Graph, labels) -> Graph:
    """Reorder nodes to follow ``labels``, a superset of the graph's labels;
    labels the graph lacks become isolated nodes.  Undoes the loss of
    isolated nodes and id order in an edge-list round trip."""
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise DomainError("duplicate labels in label table")
    target = {x: i for i, x in enumerate(labels)}
    missing = [x for x in graph.labels if x not in target]
    if missing:
        raise DomainError(f"{len(missing)} graph labels absent from the label table, e.g. {missing[0]!r}")
    new_id = np.array([target[x] for x in graph.labels], dtype=np.int64)
    e = graph.edges()
    return Graph.from_edges(len(labels), new_id[e[:, 0]], new_id[e[:, 1]], labels)


def read_labels(text_stream) -> tuple:
    """One label per line, in id order."""
    return tuple(line.strip() for line in text_stream if line.strip())


def write_labels(graph: Graph, out) -> None:
    for label in graph.labels:
        out.write(f"{label}\n")


def write_edge_list(graph: Graph, out) -> None:
    labels = graph.labels
    for u, v in graph.edges():
        out.write(f"{labels[u]} {labels[v]}\n")


def write_communities(cs: CommunitySet, graph: Graph, out) -> None:
    labels = graph.labels
    for c in cs.communities:
        out.write(" ".join(labels[u] for u in c) + "\n")


def graph_from_networkx(nx_graph) -> Graph:
    """Convenience adapter; node labels become ``str(node)``."""
    nodes = list(nx_graph.nodes())
    index = {u: i for i, u in enumerate(nodes)}
    src = [index[u] for u, _ in nx_graph.edges()]
    dst = [index[v] for _, v in nx_graph.edges()]
    return Graph.from_edges(len(nodes), src, dst, tuple(str(u) for u in nodes))


def communities_from_lists(lists: Sequence[Sequence[int]], n) -> CommunitySet:
    return CommunitySet(tuple(lists), n)
