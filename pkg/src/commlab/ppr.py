"""Personalized PageRank by local push (Andersen, Chung & Lang 2006) and an
exact power-iteration reference.

The walk is non-lazy: ``pi = alpha * e_s + (1 - alpha) * pi @ P`` with
``P = D^{-1} A``.  A node of degree zero keeps all of its mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, GuardError, NumericError
from .graph import Graph

EXACT_GUARD = 10_000


@dataclass(frozen=True)
class PprParams:
    alpha: float = 0.15
    r_max: float = 1e-5

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if not self.r_max > 0.0:
            raise DomainError("r_max must be positive")


@dataclass(frozen=True, eq=False)
class SparseScoreVector:
    """Nonzero PPR estimates from one source, sorted by node id."""

    source: int
    nodes: np.ndarray
    scores: np.ndarray

    def __getitem__(self, v) -> float:
        i = np.searchsorted(self.nodes, v)
        if i < len(self.nodes) and self.nodes[i] == v:
            return float(self.scores[i])
        return 0.0

    def __len__(self):
        return len(self.nodes)

    def to_dict(self) -> dict:
        return dict(zip(self.nodes.tolist(), self.scores.tolist()))

    def dense(self, n) -> np.ndarray:
        out = np.zeros(n)
        out[self.nodes] = self.scores
        return out


@numba.njit(cache=True)
def _push(offsets, nbrs, deg, alpha, r_max, p, r, queue, in_queue, pending, max_pushes):
    """FIFO push loop over the buffers ``p`` and ``r``.

    ``queue[:pending]`` holds the initially active nodes.  Returns the number
    of pushes performed; stops after ``max_pushes`` when that is nonnegative.
    """
    n = deg.shape[0]
    cap = n + 1
    head = 0
    tail = pending
    pushes = 0
    while pending > 0:
        if max_pushes >= 0 and pushes >= max_pushes:
            break
        u = queue[head]
        head = (head + 1) % cap
        pending -= 1
        in_queue[u] = False
        ru = r[u]
        du = deg[u]
        if du == 0:
            p[u] += ru
            r[u] = 0.0
            pushes += 1
            continue
        if ru < r_max * du:
            continue
        p[u] += alpha * ru
        r[u] = 0.0
        share = (1.0 - alpha) * ru / du
        for k in range(offsets[u], offsets[u + 1]):
            w = nbrs[k]
            r[w] += share
            if not in_queue[w] and r[w] >= r_max * deg[w]:
                queue[tail] = w
                tail = (tail + 1) % cap
                pending += 1
                in_queue[w] = True
        pushes += 1
    return pushes


@numba.njit(cache=True)
def _sweep_columns(offsets, nbrs, deg, sources, targets, alpha, r_max, out):
    """``out[i, j] = push(sources[i])[targets[j]]``, reusing buffers between pushes."""
    n = deg.shape[0]
    p = np.zeros(n)
    r = np.zeros(n)
    queue = np.empty(n + 1, np.int64)
    in_queue = np.zeros(n, np.bool_)
    for i in range(sources.shape[0]):
        s = sources[i]
        r[s] = 1.0
        queue[0] = s
        in_queue[s] = True
        _push(offsets, nbrs, deg, alpha, r_max, p, r, queue, in_queue, 1, -1)
        for j in range(targets.shape[0]):
            out[i, j] = p[targets[j]]
        p[:] = 0.0
        r[:] = 0.0


def _check_source(g, source):
    if not 0 <= source < g.node_count:
        raise DomainError(f"source {source} outside [0, {g.node_count})")


def push_state(g: Graph, source, params: PprParams, max_pushes=-1, resume=None):
    """Dense ``(estimate, residual, pushes)`` after running the push loop.

    ``max_pushes`` truncates the run to expose intermediate states.  ``resume``
    continues from an earlier ``(estimate, residual)`` pair, typically one
    finished at a larger ``r_max``; estimates then only grow.
    """
    _check_source(g, source)
    n = g.node_count
    deg = g.degrees
    if resume is None:
        p = np.zeros(n)
        r = np.zeros(n)
        r[source] = 1.0
        active = np.array([source], dtype=np.int64)
    else:
        p = np.array(resume[0], dtype=np.float64)
        r = np.array(resume[1], dtype=np.float64)
        active = np.flatnonzero((r >= params.r_max * deg) & (r > 0))
    queue = np.empty(n + 1, np.int64)
    queue[:len(active)] = active
    in_queue = np.zeros(n, np.bool_)
    in_queue[active] = True
    pushes = _push(g.offsets, g.neighbor_ids, deg, params.alpha, params.r_max,
                   p, r, queue, in_queue, len(active), int(max_pushes))
    return p, r, pushes


def appr_push(g: Graph, source, params: PprParams = PprParams()) -> SparseScoreVector:
    """Approximate PPR vector from ``source``.

    On return every residual satisfies ``r(v) < r_max * deg(v)``, which bounds
    the error at each node by ``r_max * deg(v)``.
    """
    p, r, _ = push_state(g, source, params)
    if abs(p.sum() + r.sum() - 1.0) > 1e-12:
        raise NumericError("push lost probability mass")
    nodes = np.flatnonzero(p > 0)
    return SparseScoreVector(int(source), nodes, p[nodes])


def ppr_columns(g: Graph, targets, params: PprParams = PprParams(), sources=None) -> np.ndarray:
    """Push from every source and keep only the ``targets`` columns.

    Returns an array of shape ``(len(sources), len(targets))`` whose entry
    ``[i, j]`` equals ``appr_push(g, sources[i], params)[targets[j]]``.  This
    is how reverse scores (PPR from every node into a few targets) are
    gathered without storing every vector.
    """
    targets = np.asarray(targets, dtype=np.int64)
    sources = np.arange(g.node_count) if sources is None else np.asarray(sources, dtype=np.int64)
    out = np.zeros((len(sources), len(targets)))
    if len(sources) and len(targets):
        _sweep_columns(g.offsets, g.neighbor_ids, g.degrees, sources, targets,
                       params.alpha, params.r_max, out)
    return out


def exact_ppr(g: Graph, source, alpha=0.15, tol=1e-12, max_iter=100_000, guard=EXACT_GUARD) -> np.ndarray:
    """Power iteration to an L1 step below ``tol``.

    Converges geometrically at rate ``1 - alpha``, so the iteration cap is only
    reachable for alpha vanishingly close to zero.
    """
    _check_source(g, source)
    n = g.node_count
    if n > guard:
        raise GuardError(f"exact PPR is dense; n={n} exceeds guard {guard}")
    deg = g.degrees.astype(float)
    inv = np.divide(1.0, deg, out=np.zeros(n), where=deg > 0)
    A = g.adjacency
    dangling = deg == 0
    e = np.zeros(n)
    e[source] = 1.0
    pi = e.copy()
    for _ in range(max_iter):
        walked = A.T @ (pi * inv) + np.where(dangling, pi, 0.0)
        nxt = alpha * e + (1.0 - alpha) * walked
        step = np.abs(nxt - pi).sum()
        pi = nxt
        if step <= tol:
            return pi
    raise NumericError(f"power iteration did not converge in {max_iter} steps")


class PprCache:
    """Memoized forward pushes and reverse columns for one graph."""

    def __init__(self, g: Graph, params: PprParams = PprParams()):
        self.graph = g
        self.params = params
        self._forward = {}
        self._reverse = {}

    def vector(self, source) -> SparseScoreVector:
        vec = self._forward.get(source)
        if vec is None:
            vec = self._forward[source] = appr_push(self.graph, source, self.params)
        return vec

    def score(self, source, target) -> float:
        """Estimated PPR from ``source`` into ``target``."""
        if target in self._reverse:
            return float(self._reverse[target][source])
        return self.vector(source)[target]

    def prepare(self, targets) -> None:
        """Batch the reverse columns of ``targets`` in a single sweep."""
        todo = sorted({int(t) for t in targets} - set(self._reverse))
        if not todo:
            return
        cols = ppr_columns(self.graph, todo, self.params)
        for j, t in enumerate(todo):
            self._reverse[t] = cols[:, j].copy()

    def column(self, target) -> np.ndarray:
        """Estimated PPR from every node into ``target``."""
        if target not in self._reverse:
            self.prepare([target])
        return self._reverse[target]
