"""Planted-partition stochastic block models with contiguous equal blocks.

Edges are drawn by geometric skip sampling over an implicit ordering of the
candidate pairs, so the cost is proportional to the number of edges produced
rather than to n².
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._random import substream
from .errors import DomainError, GuardError
from .graph import CommunitySet, Graph

DEFAULT_EDGE_BUDGET = 50_000_000


@dataclass(frozen=True)
class SbmParams:
    n: int
    block_size: int
    p_intra: float
    q_inter: float
    seed: int

    def __post_init__(self):
        if self.block_size < 1 or self.n < 1 or self.n % self.block_size:
            raise DomainError(f"block size {self.block_size} must divide n={self.n}")
        if not 0.0 <= self.q_inter <= self.p_intra <= 1.0:
            raise DomainError("need 0 <= q_inter <= p_intra <= 1")

    @property
    def blocks(self) -> int:
        return self.n // self.block_size

    def expected_edges(self) -> float:
        b, k = self.block_size, self.blocks
        intra = k * b * (b - 1) / 2
        inter = k * (k - 1) / 2 * b * b
        return self.p_intra * intra + self.q_inter * inter

    def expected_degree(self) -> float:
        return 2 * self.expected_edges() / self.n


def balanced_q(n, block_size, p_intra) -> float:
    """Inter-block probability that equalizes expected inside and outside degree.

    A node expects ``p(b-1)`` neighbors in its block and ``q(n-b)`` outside.
    """
    if not n > block_size >= 2:
        raise DomainError("balanced_q needs n > block_size >= 2")
    return p_intra * (block_size - 1) / (n - block_size)


def p_intra_for_degree(avg_degree, block_size) -> float:
    """``p_intra`` giving the requested mean degree under ``balanced_q``."""
    p = avg_degree / (2 * (block_size - 1))
    if not 0 < p <= 1:
        raise DomainError(f"mean degree {avg_degree} unreachable with blocks of {block_size}")
    return p


def skip_sample(total, p, rng) -> np.ndarray:
    """Sorted positions in ``[0, total)`` each kept independently with prob ``p``.

    Gaps between kept positions are geometric, so only the kept positions are
    ever materialized.
    """
    if p <= 0.0 or total <= 0:
        return np.empty(0, dtype=np.int64)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    pos = -1
    mean = p * total
    batch = int(mean + 6 * math.sqrt(mean) + 64)
    while True:
        gaps = rng.geometric(p, size=batch)
        steps = pos + np.cumsum(gaps)
        chunks.append(steps[steps < total])
        if steps[-1] >= total:
            break
        pos = int(steps[-1])
        batch = max(64, batch // 4)
    return np.concatenate(chunks)


def _decode_upper_pairs(idx, k):
    """Map row-major indices over ``{(s, t): 0 <= s < t < k}`` back to ``(s, t)``."""
    idx = np.asarray(idx, dtype=np.int64)

    def row_start(s):
        return s * (2 * k - s - 1) // 2

    s = np.floor(((2 * k - 1) - np.sqrt((2.0 * k - 1) ** 2 - 8.0 * idx)) / 2).astype(np.int64)
    s = np.clip(s, 0, max(k - 2, 0))
    # float rounding can leave s off by one either way
    s -= row_start(s) > idx
    s += row_start(s + 1) <= idx
    return s, idx - row_start(s) + s + 1


def generate_sbm(params: SbmParams, edge_budget=DEFAULT_EDGE_BUDGET):
    """Sample a graph and its block communities.

    Stream 0 of the seed drives inter-block edges and stream ``1 + t`` drives
    block ``t``, so the result does not depend on generation order.
    """
    expected = params.expected_edges()
    if expected > edge_budget:
        raise GuardError(
            f"expected {expected:,.0f} edges exceeds the budget of {edge_budget:,}; "
            "lower n or the edge probabilities"
        )
    n, b, k = params.n, params.block_size, params.blocks
    srcs, dsts = [], []

    local_i, local_j = np.triu_indices(b, 1)
    n_local = len(local_i)
    for t in range(k):
        hits = skip_sample(n_local, params.p_intra, substream(params.seed, 1 + t))
        srcs.append(local_i[hits] + t * b)
        dsts.append(local_j[hits] + t * b)

    if k > 1:
        total = k * (k - 1) // 2 * b * b
        hits = skip_sample(total, params.q_inter, substream(params.seed, 0))
        block_pair, cell = np.divmod(hits, b * b)
        s, t = _decode_upper_pairs(block_pair, k)
        a, c = np.divmod(cell, b)
        srcs.append(s * b + a)
        dsts.append(t * b + c)

    g = Graph.from_edges(n, np.concatenate(srcs), np.concatenate(dsts))
    blocks = tuple(np.arange(t * b, (t + 1) * b) for t in range(k))
    return g, CommunitySet(blocks, n)
