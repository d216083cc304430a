"""Precision@k over sampled vertices and reliability curves."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._random import substream
from .graph import CommunitySet, Graph

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    method: str
    k: int
    vertices: list
    precisions: list
    seed: int = 0
    params: dict = field(default_factory=dict)

    @property
    def mean_precision(self) -> float:
        return float(np.mean(self.precisions)) if self.precisions else float("nan")

    @property
    def curve(self) -> list:
        return reliability_curve(self.precisions, self.k)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_precision"] = self.mean_precision
        d["curve"] = [list(p) for p in self.curve]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        return cls(d["method"], int(d["k"]), list(d["vertices"]), list(d["precisions"]),
                   int(d.get("seed", 0)), dict(d.get("params", {})))

    @classmethod
    def from_json(cls, text) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def sample_eval_vertices(g: Graph, cs: CommunitySet, count=1000, min_k=10, seed=0) -> np.ndarray:
    """Uniform sample, without replacement, of vertices with at least
    ``min_k`` same-community partners; sorted by id."""
    partners = cs.partner_counts()
    pool = np.flatnonzero(partners >= min_k)
    log.info("%d of %d vertices qualify (%.3f)", len(pool), g.node_count, len(pool) / max(g.node_count, 1))
    if len(pool) < count:
        log.warning("only %d qualifying vertices, fewer than the %d requested", len(pool), count)
        return pool
    return np.sort(substream(seed, 0).choice(pool, size=count, replace=False))


def rank_candidates(scores, v) -> np.ndarray:
    """All ``u != v`` by descending score, ties broken by ascending id."""
    scores = np.asarray(scores, dtype=np.float64)
    ids = np.arange(len(scores))
    order = np.lexsort((ids, -scores))
    return order[order != v]


def precision_at_k(scorer, g: Graph, cs: CommunitySet, v, k=10) -> float:
    ranked = rank_candidates(scorer.scores_from(v), v)
    top = ranked[:k]
    return float(np.count_nonzero(cs.partner_mask(v)[top])) / k


def reliability_curve(precisions, k=10) -> list:
    """``(x, y)`` for ``x`` in ``0, 1/k, ..., 1`` with ``y`` the fraction of
    samples whose precision is at least ``x``."""
    p = np.asarray(precisions, dtype=np.float64)
    if p.size == 0:
        raise ValueError("reliability curve of an empty sample")
    # precisions are multiples of 1/k; compare on the integer grid
    hits = np.rint(p * k).astype(np.int64)
    return [(j / k, float(np.mean(hits >= j))) for j in range(k + 1)]


def evaluate_method(scorer, g: Graph, cs: CommunitySet, count=1000, k=10, seed=0,
                    min_k=10, vertices=None, method=None, workers=1) -> EvalReport:
    """Mean precision@k over sampled vertices.  ``workers > 1`` ranks
    vertices on threads; the report does not depend on the worker count."""
    if vertices is None:
        vertices = sample_eval_vertices(g, cs, count, min_k, seed)
    vertices = sorted(int(v) for v in vertices)
    if hasattr(scorer, "prepare"):
        scorer.prepare(vertices)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            precisions = list(pool.map(lambda v: precision_at_k(scorer, g, cs, v, k), vertices))
    else:
        precisions = [precision_at_k(scorer, g, cs, v, k) for v in vertices]
    return EvalReport(method or scorer.tag, k, vertices, precisions, seed,
                      {"count": count, "min_k": min_k, "scorer": scorer.tag})
