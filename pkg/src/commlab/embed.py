"""Node embeddings from factorizing proximity matrices.

Three trainers share the ``Embedding`` container (a ``d x n`` array whose
column ``i`` is the vector of node ``i``):

* ``direct_factorize``: best PSD rank-``d`` Gram approximation via the
  symmetric eigendecomposition,
* ``softmax_factorize``: full-batch descent on the row-wise KL divergence
  between ``M`` and the normalized softmax of ``V^T V``,
* ``sgns_from_walks``: skip-gram with negative sampling over a walk corpus
  (DeepWalk / node2vec).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from ._random import substream
from .errors import DomainError, NumericError, ParseError
from .graph import Graph
from .proximity import (
    DENSE_GUARD,
    ProximityMatrix,
    WalkCorpus,
    check_dense,
    netmf_transform,
    walk_matrix_power,
)

log = logging.getLogger(__name__)

DEFAULT_DIM = 128


@dataclass(frozen=True, eq=False)
class Embedding:
    vectors: np.ndarray  # shape (d, n)
    method: str = "unknown"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise DomainError("embedding must be a d x n array with d >= 1")
        if not np.all(np.isfinite(v)):
            raise NumericError("embedding has non-finite entries")
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def vector(self, i) -> np.ndarray:
        return self.vectors[:, i]

    def gram(self) -> np.ndarray:
        return self.vectors.T @ self.vectors


# -- direct factorization -----------------------------------------------------


def _is_symmetric(m) -> bool:
    if sp.issparse(m):
        diff = abs(m - m.T)
        return diff.nnz == 0 or diff.max() <= 1e-12 * max(abs(m).max(), 1.0)
    return np.allclose(m, m.T, rtol=0, atol=1e-12 * max(np.abs(m).max(), 1.0))


def _top_eigenpairs(m, d, seed=0):
    """Largest ``d`` algebraic eigenpairs of a symmetric matrix, descending."""
    n = m.shape[0]
    if not sp.issparse(m) and (n <= 2000 or d >= n // 4):
        # LAPACK syevr: Householder tridiagonalization + MRRR
        vals, vecs = np.linalg.eigh(m)
        return vals[::-1][:d], vecs[:, ::-1][:, :d]
    if d >= n - 1:
        return _top_eigenpairs(m.toarray() if sp.issparse(m) else m, d)
    v0 = substream(seed, 7).standard_normal(n)
    vals, vecs = spla.eigsh(m, k=d, which="LA", v0=v0, tol=1e-12)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def direct_factorize(m: ProximityMatrix, d, seed=0) -> Embedding:
    """Rank-``d`` PSD Gram approximation ``V^T V`` of a symmetric matrix.

    ``V = diag(sqrt(lambda_+)) U^T`` over the top ``d`` eigenpairs; rows for
    non-positive eigenvalues are zero.  By Eckart-Young this minimizes
    ``||V^T V - M||_F`` over all ``d x n`` matrices.
    """
    mat = m.matrix
    n = mat.shape[0]
    if not 1 <= d <= n:
        raise DomainError(f"dimension {d} outside [1, {n}]")
    symmetrized = False
    if not _is_symmetric(mat):
        mat = (mat + mat.T) / 2
        symmetrized = True
    if not sp.issparse(mat):
        check_dense(n, DENSE_GUARD, "dense eigendecomposition")
    vals, vecs = _top_eigenpairs(mat, d, seed)
    keep = vals > 0
    if not keep.any():
        log.warning("no positive eigenvalue; returning the zero embedding")
    residual = 0.0
    if keep.any():
        mv = mat @ vecs[:, keep]
        residual = float(np.max(np.linalg.norm(mv - vecs[:, keep] * vals[keep], axis=0)))
    V = np.zeros((d, n))
    V[keep] = np.sqrt(vals[keep])[:, None] * vecs[:, keep].T
    params = {**m.params, "source_kind": m.kind, "symmetrized": symmetrized,
              "positive_eigenvalues": int(keep.sum()), "eig_residual": residual}
    return Embedding(V, "direct", params)


# -- softmax factorization ----------------------------------------------------


def nsm_log(V) -> np.ndarray:
    """Row-wise log-softmax of ``V^T V`` (self term included)."""
    S = V.T @ V
    return S - logsumexp(S, axis=1, keepdims=True)


def softmax_loss(V, M) -> float:
    """``sum_i KL(M_i || nsm(V)_i)``."""
    logq = nsm_log(V)
    pos = M > 0
    return float(np.sum(M[pos] * (np.log(M[pos]) - logq[pos])))


def softmax_gradient(V, M) -> np.ndarray:
    logq = nsm_log(V)
    G = np.exp(logq) * M.sum(axis=1, keepdims=True) - M
    return V @ (G + G.T)


def softmax_factorize(m: ProximityMatrix, d, steps=500, step_size=0.5, seed=0,
                      init_scale=0.01, tol=1e-10) -> Embedding:
    """Minimize the row-wise KL divergence to ``m`` by backtracking descent.

    A step that raises the loss or makes it non-finite is retried at half the
    size; accepted steps therefore never increase the loss.
    """
    M = m.dense()
    n = M.shape[0]
    check_dense(n, DENSE_GUARD, "softmax factorization")
    if np.any(M < 0) or not np.allclose(M.sum(axis=1), 1.0, atol=1e-9):
        raise DomainError("softmax factorization needs a row-stochastic matrix")
    V = init_scale * substream(seed, 0).standard_normal((d, n))
    loss = softmax_loss(V, M)
    history = [loss]
    eta = step_size
    for _ in range(steps):
        grad = softmax_gradient(V, M)
        if np.linalg.norm(grad) <= tol:
            break
        for _halving in range(60):
            trial = V - eta * grad
            trial_loss = softmax_loss(trial, M)
            if np.isfinite(trial_loss) and trial_loss <= loss:
                break
            eta /= 2
        else:
            raise NumericError("softmax factorization could not find a descent step")
        if not np.isfinite(trial_loss):
            raise NumericError("softmax factorization loss became non-finite")
        V, loss = trial, trial_loss
        history.append(loss)
        if eta < 1e-14:
            break
    params = {**m.params, "steps": steps, "step_size": step_size, "seed": seed,
              "final_loss": loss, "loss_history": history}
    return Embedding(V, "softmax", params)


# -- skip-gram with negative sampling -----------------------------------------


@numba.njit(cache=True, fastmath=True)
def _sgns_chunk(walks, syn0, syn1, window, negatives, table, draws, lr0, lr_min,
                done, total, neu):
    """One pass over ``walks``; returns (tokens processed, draws used)."""
    d = syn0.shape[1]
    used = 0
    for w in range(walks.shape[0]):
        walk = walks[w]
        L = walk.shape[0]
        while L > 0 and walk[L - 1] < 0:
            L -= 1
        for t in range(L):
            lr = lr0 * (1.0 - done / total)
            if lr < lr_min:
                lr = lr_min
            center = walk[t]
            lo = max(0, t - window)
            hi = min(L, t + window + 1)
            for c in range(lo, hi):
                if c == t:
                    continue
                context = walk[c]
                neu[:] = 0.0
                for s in range(negatives + 1):
                    if s == 0:
                        target = context
                        label = 1.0
                    else:
                        target = table[draws[used]]
                        used += 1
                        if target == context:
                            continue
                        label = 0.0
                    f = np.float32(0.0)
                    for k in range(d):
                        f += syn0[center, k] * syn1[target, k]
                    if f > 30.0:
                        sig = 1.0
                    elif f < -30.0:
                        sig = 0.0
                    else:
                        sig = 1.0 / (1.0 + math.exp(-f))
                    gstep = np.float32((label - sig) * lr)
                    for k in range(d):
                        neu[k] += gstep * syn1[target, k]
                        syn1[target, k] += gstep * syn0[center, k]
                for k in range(d):
                    syn0[center, k] += neu[k]
            done += 1
    return done, used


def _unigram_table(counts, power=0.75, size=None):
    weights = counts.astype(np.float64) ** power
    size = size or max(1_000_000, 100 * len(counts))
    cdf = np.cumsum(weights) / weights.sum()
    return np.searchsorted(cdf, (np.arange(size) + 0.5) / size).astype(np.int32)


def sgns_from_walks(corpus: WalkCorpus, d=DEFAULT_DIM, window=5, negatives=5, epochs=5,
                    step_size=0.025, seed=0, chunk_walks=2048) -> Embedding:
    """Skip-gram with negative sampling over every pair within ``window`` steps.

    Single-threaded and deterministic for a given seed.  Input vectors start
    uniform in ``[-0.5/d, 0.5/d]``, output vectors at zero; the learning rate
    decays linearly to ``1e-4 * step_size``.  Negatives come from the corpus
    frequency to the 0.75 power, which for walks is proportional to
    degree^0.75.
    """
    if negatives < 1:
        raise DomainError("negatives must be at least 1; with none every vector collapses together")
    if window < 1 or epochs < 1 or d < 1:
        raise DomainError("window, epochs and d must be positive")
    walks = corpus.walks
    if walks.size == 0 or not np.any(walks >= 0):
        raise DomainError("empty walk corpus")
    n = corpus.node_count
    counts = corpus.counts()
    rng = substream(seed, 0)
    syn0 = ((rng.random((n, d)) - 0.5) / d).astype(np.float32)
    syn1 = np.zeros((n, d), dtype=np.float32)
    neu = np.zeros(d, dtype=np.float32)
    table = _unigram_table(counts)
    tokens = int(np.sum(walks >= 0))
    total = float(tokens * epochs)
    done = 0.0
    draw_rng = substream(seed, 1)
    per_walk = 2 * window * walks.shape[1] * negatives
    for _ in range(epochs):
        for start in range(0, len(walks), chunk_walks):
            chunk = walks[start:start + chunk_walks]
            draws = draw_rng.integers(0, len(table), size=per_walk * len(chunk), dtype=np.int64)
            done, _used = _sgns_chunk(chunk, syn0, syn1, window, negatives, table, draws,
                                      step_size, step_size * 1e-4, done, total, neu)
    vectors = syn0.astype(np.float64).T.copy()
    missing = np.flatnonzero(counts == 0)
    if len(missing):
        log.warning("%d nodes never appear in the corpus; their vectors are zero", len(missing))
        vectors[:, missing] = 0.0
    params = {"d": d, "window": window, "negatives": negatives, "epochs": epochs,
              "step_size": step_size, "seed": seed, "walk_p": corpus.p, "walk_q": corpus.q,
              "walks_per_node": corpus.walks_per_node, "walk_length": corpus.length,
              "walk_seed": corpus.seed}
    return Embedding(vectors, "sgns", params)


# -- GraRep -------------------------------------------------------------------


def grarep(g: Graph, d, K=5, guard=DENSE_GUARD, seed=0, isolated="error") -> Embedding:
    """Concatenate ``d/K``-dimensional direct factorizations of each
    log-transformed step matrix ``P^k``, ``k = 1..K``."""
    if K < 1 or d % K:
        raise DomainError(f"dimension {d} is not divisible by K={K}")
    check_dense(g.node_count, guard, "GraRep (dense powers of the walk matrix)")
    blocks = []
    for k in range(1, K + 1):
        target = netmf_transform(walk_matrix_power(g, k, guard=guard, isolated=isolated), g, 1)
        blocks.append(direct_factorize(target, d // K, seed=seed).vectors)
    return Embedding(np.vstack(blocks), "grarep", {"d": d, "K": K})


# -- file format --------------------------------------------------------------


def write_embedding(e: Embedding, out, labels=None) -> None:
    """``n d`` header, then one line per node: label and ``d`` floats."""
    labels = labels or [str(i) for i in range(e.n)]
    out.write(f"{e.n} {e.dim}\n")
    for i in range(e.n):
        out.write(labels[i] + " " + " ".join(format(x, ".17g") for x in e.vectors[:, i]) + "\n")


def read_embedding(text_stream, method="loaded"):
    """Inverse of ``write_embedding``; returns ``(embedding, labels)``."""
    lines = iter(text_stream)
    try:
        n, d = (int(t) for t in next(lines).split())
    except (StopIteration, ValueError) as exc:
        raise ParseError("bad embedding header", 1) from exc
    V = np.empty((d, n))
    labels = []
    for i in range(n):
        try:
            tokens = next(lines).split()
        except StopIteration as exc:
            raise ParseError(f"expected {n} vectors, found {i}", i + 2) from exc
        if len(tokens) != d + 1:
            raise ParseError(f"expected {d + 1} tokens", i + 2)
        labels.append(tokens[0])
        V[:, i] = [float(t) for t in tokens[1:]]
    return Embedding(V, method), labels
