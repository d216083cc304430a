"""Proximity matrices built from random walks, and walk sampling.

Dense matrices are the small-scale path and sit behind a node-count guard.
The sum of walk powers is sparse at benchmark scale (``K = 2`` on a sparse
graph), so the walk-sum and log transform also accept ``sparse=True`` and
return scipy CSR matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from ._random import substream
from .errors import DomainError, GuardError
from .graph import Graph

DENSE_GUARD = 20_000

WALK_SUM = "walk-sum"
WALK_POWER = "walk-power"
NETMF_LOG = "netmf-log"
ADJACENCY = "adjacency"


@dataclass(frozen=True, eq=False)
class ProximityMatrix:
    matrix: object  # ndarray or scipy.sparse CSR
    kind: str
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)


def check_dense(n, guard=DENSE_GUARD, what="dense proximity matrix"):
    if n > guard:
        raise GuardError(
            f"{what} needs n x n memory; n={n} exceeds the guard of {guard}. "
            "Use the sparse path or walk sampling instead."
        )


def _check_isolated(g: Graph, isolated):
    if isolated not in ("error", "zero"):
        raise DomainError(f"isolated policy must be 'error' or 'zero', got {isolated!r}")
    if isolated == "error" and np.any(g.degrees == 0):
        raise DomainError("random-walk matrix undefined with isolated nodes (pass isolated='zero')")


def transition_matrix(g: Graph, isolated="error") -> sp.csr_matrix:
    """``D^{-1} A``.  With ``isolated='zero'`` degree-0 rows stay zero, so
    the result is row-stochastic only on the non-isolated nodes."""
    _check_isolated(g, isolated)
    deg = g.degrees.astype(float)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return sp.csr_matrix(sp.diags(inv) @ g.adjacency)


def adjacency_matrix(g: Graph) -> ProximityMatrix:
    check_dense(g.node_count)
    return ProximityMatrix(g.adjacency.toarray(), ADJACENCY)


def walk_matrix_sum(g: Graph, K, sparse=False, guard=DENSE_GUARD, isolated="error") -> ProximityMatrix:
    """Mean of the first ``K`` powers of ``P = D^{-1} A``."""
    if K < 1:
        raise DomainError("K must be at least 1")
    P = transition_matrix(g, isolated)
    if not sparse:
        check_dense(g.node_count, guard)
        P = P.toarray()
    acc = P.copy()
    power = P
    for _ in range(K - 1):
        power = power @ P
        acc = acc + power
    acc = acc / K
    if sparse:
        acc = sp.csr_matrix(acc)
    return ProximityMatrix(acc, WALK_SUM, {"K": K, "isolated": isolated})


def walk_matrix_power(g: Graph, k, sparse=False, guard=DENSE_GUARD, isolated="error") -> ProximityMatrix:
    """``P^k`` alone, the per-step target used by GraRep."""
    if k < 1:
        raise DomainError("k must be at least 1")
    P = transition_matrix(g, isolated)
    if not sparse:
        check_dense(g.node_count, guard)
        P = P.toarray()
    power = P
    for _ in range(k - 1):
        power = power @ P
    if sparse:
        power = sp.csr_matrix(power)
    return ProximityMatrix(power, WALK_POWER, {"k": k, "isolated": isolated})


def netmf_transform(m: ProximityMatrix, g: Graph, negatives=1) -> ProximityMatrix:
    """Truncated log transform ``max(ln(vol * M_ij / (negatives * d_j)), 0)``."""
    if m.kind not in (WALK_SUM, WALK_POWER):
        raise DomainError(f"netmf transform expects walk matrices, got {m.kind}")
    if negatives < 1:
        raise DomainError("negatives must be at least 1")
    deg = g.degrees.astype(float)
    if np.any(deg == 0) and m.params.get("isolated") != "zero":
        raise DomainError("zero-degree column in netmf transform")
    vol = deg.sum()
    # isolated columns are all zero in m already; any finite scale keeps them zero
    col_scale = vol / (negatives * np.maximum(deg, 1.0))
    if m.is_sparse:
        out = sp.csr_matrix(m.matrix @ sp.diags(col_scale))
        out.data = np.maximum(np.log(np.maximum(out.data, 1e-300)), 0.0)
        out.eliminate_zeros()
    else:
        scaled = m.matrix * col_scale[None, :]
        with np.errstate(divide="ignore"):
            out = np.maximum(np.log(scaled), 0.0)
    return ProximityMatrix(out, NETMF_LOG, {**m.params, "negatives": negatives})


@dataclass(frozen=True, eq=False)
class WalkCorpus:
    """Walks as a 2-D id array; ``-1`` pads walks cut short at isolated roots."""

    walks: np.ndarray
    node_count: int
    walks_per_node: int
    length: int
    p: float
    q: float
    seed: int

    def __len__(self):
        return len(self.walks)

    def __iter__(self):
        for w in self.walks:
            yield w[w >= 0]

    def counts(self) -> np.ndarray:
        flat = self.walks[self.walks >= 0]
        return np.bincount(flat, minlength=self.node_count)

    def write(self, out) -> None:
        for w in self:
            out.write(" ".join(map(str, w.tolist())) + "\n")


@numba.njit(cache=True)
def _adjacent(offsets, nbrs, a, b):
    lo = offsets[a]
    hi = offsets[a + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if nbrs[mid] < b:
            lo = mid + 1
        else:
            hi = mid
    return lo < offsets[a + 1] and nbrs[lo] == b


@numba.njit(cache=True)
def _walk(offsets, nbrs, root, uniforms, inv_p, inv_q, first_order, weights, out):
    L = out.shape[0]
    out[:] = -1
    out[0] = root
    if offsets[root + 1] == offsets[root]:
        return
    for t in range(1, L):
        cur = out[t - 1]
        start = offsets[cur]
        deg = offsets[cur + 1] - start
        if t == 1 or first_order:
            out[t] = nbrs[start + min(int(uniforms[t] * deg), deg - 1)]
            continue
        prev = out[t - 2]
        total = 0.0
        for k in range(deg):
            x = nbrs[start + k]
            if x == prev:
                w = inv_p
            elif _adjacent(offsets, nbrs, x, prev):
                w = 1.0
            else:
                w = inv_q
            total += w
            weights[k] = total
        target = uniforms[t] * total
        chosen = deg - 1
        for k in range(deg):
            if target < weights[k]:
                chosen = k
                break
        out[t] = nbrs[start + chosen]


@numba.njit(cache=True)
def _walks_for_root(offsets, nbrs, root, uniforms, inv_p, inv_q, first_order, weights, out):
    for w in range(out.shape[0]):
        _walk(offsets, nbrs, root, uniforms[w], inv_p, inv_q, first_order, weights, out[w])


def sample_walks(g: Graph, walks_per_node=10, length=40, p=1.0, q=1.0, seed=0) -> WalkCorpus:
    """Second-order (node2vec) walks; ``p = q = 1`` gives uniform walks.

    Unnormalized step weights are ``1/p`` to return to the previous node,
    ``1`` to a common neighbor of the previous node and ``1/q`` otherwise.
    Root ``r`` draws from substream ``(seed, 1, r)``; walks are ordered pass
    by pass with each pass shuffled by substream ``(seed, 0)``.
    """
    if p <= 0 or q <= 0:
        raise DomainError("p and q must be positive")
    if length < 1 or walks_per_node < 1:
        raise DomainError("walk length and walks per node must be positive")
    n = g.node_count
    first_order = p == 1.0 and q == 1.0
    walks = np.empty((walks_per_node, n, length), dtype=np.int32)
    weights = np.empty(max(int(g.degrees.max(initial=0)), 1))
    for root in range(n):
        uniforms = substream(seed, 1, root).random((walks_per_node, length))
        _walks_for_root(g.offsets, g.neighbor_ids, root, uniforms, 1.0 / p, 1.0 / q,
                        first_order, weights, walks[:, root, :])
    order_rng = substream(seed, 0)
    for w in range(walks_per_node):
        walks[w] = walks[w, order_rng.permutation(n)]
    return WalkCorpus(walks.reshape(walks_per_node * n, length), n, walks_per_node,
                      length, float(p), float(q), int(seed))
