"""Pair scorers: raw dot product, Hadamard features through logistic
regression, and the structural-feature logistic baseline.

Every scorer exposes ``score(u, v)`` and ``scores_from(v)``.  The latter
returns one ranking key per node; for the logistic scorers it is the logit,
which orders pairs exactly like the sigmoid but without saturating to ties.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit

from ._random import substream
from .embed import Embedding
from .errors import DomainError
from .features import FEATURE_NAMES, features_from, pair_features
from .graph import CommunitySet, Graph
from .ppr import PprCache, PprParams

log = logging.getLogger(__name__)


def dot_score(e: Embedding, u, v) -> float:
    if u == v:
        raise DomainError("scoring needs two distinct nodes")
    return float(e.vectors[:, u] @ e.vectors[:, v])


def hadamard_features(e: Embedding, u, v) -> np.ndarray:
    if u == v:
        raise DomainError("scoring needs two distinct nodes")
    return e.vectors[:, u] * e.vectors[:, v]


# -- logistic regression ------------------------------------------------------


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    kept: np.ndarray  # indices of the non-constant input features
    n_features: int
    provenance: dict = field(default_factory=dict)

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if not len(self.kept):
            return np.full(len(X), self.bias)
        Z = (X[:, self.kept] - self.mean) / self.std
        return Z @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision(X))

    def to_json(self) -> str:
        return json.dumps({
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "kept": self.kept.tolist(),
            "n_features": self.n_features,
            "provenance": self.provenance,
        }, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "LogisticModel":
        d = json.loads(text)
        return cls(np.array(d["weights"], dtype=float), float(d["bias"]),
                   np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float),
                   np.array(d["kept"], dtype=np.int64), int(d["n_features"]), d.get("provenance", {}))


def logistic_objective(params, Z, y, l2):
    """Mean log-loss plus ``l2 * ||w||^2 / 2`` and its gradient; bias is last."""
    w, b = params[:-1], params[-1]
    t = Z @ w + b
    # -y log s(t) - (1-y) log s(-t)
    loss = -np.mean(y * log_expit(t) + (1 - y) * log_expit(-t)) + 0.5 * l2 * (w @ w)
    r = (expit(t) - y) / len(y)
    grad = np.empty_like(params)
    grad[:-1] = Z.T @ r + l2 * w
    grad[-1] = r.sum()
    return loss, grad


def train_logistic(features, labels, l2_strength=1e-4, max_iters=10_000, tol=1e-8) -> LogisticModel:
    """Fit on standardized features with L-BFGS (gradient-only steps with a
    Wolfe line search, so the loss never rises between iterations)."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels, dtype=np.float64)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise DomainError("logistic regression needs both positive and negative labels")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    kept = np.flatnonzero(std > 0)
    dropped = [int(i) for i in np.flatnonzero(std == 0)]
    if dropped:
        log.info("dropping constant features %s", dropped)
    base_rate = y.mean()
    base_logit = float(np.log(base_rate / (1 - base_rate)))
    prov = {"l2_strength": l2_strength, "max_iters": max_iters, "tol": tol, "dropped": dropped}
    if not len(kept):
        return LogisticModel(np.empty(0), base_logit, np.empty(0), np.empty(0), kept, X.shape[1],
                             {**prov, "converged": True, "loss_history": []})
    Z = (X[:, kept] - mean[kept]) / std[kept]
    x0 = np.zeros(len(kept) + 1)
    x0[-1] = base_logit
    history = [logistic_objective(x0, Z, y, l2_strength)[0]]
    res = minimize(
        logistic_objective, x0, args=(Z, y, l2_strength), jac=True, method="L-BFGS-B",
        callback=lambda xk: history.append(logistic_objective(xk, Z, y, l2_strength)[0]),
        options={"maxiter": max_iters, "gtol": tol, "ftol": 0.0, "maxcor": 20},
    )
    _, grad = logistic_objective(res.x, Z, y, l2_strength)
    grad_norm = float(np.linalg.norm(grad))
    prov.update(converged=grad_norm <= tol, grad_norm=grad_norm, iterations=int(res.nit),
                final_loss=float(res.fun), loss_history=history)
    return LogisticModel(res.x[:-1], float(res.x[-1]), mean[kept], std[kept], kept, X.shape[1], prov)


# -- training pairs -----------------------------------------------------------


def qualifying_anchors(cs: CommunitySet, min_comm_size) -> np.ndarray:
    big = [c for c, s in enumerate(cs.sizes) if s >= min_comm_size]
    if not big:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate([cs.communities[c] for c in big]))


def sample_anchors(cs: CommunitySet, anchors=50, min_comm_size=20, seed=0) -> np.ndarray:
    pool = qualifying_anchors(cs, min_comm_size)
    if len(pool) < anchors:
        raise DomainError(
            f"need {anchors} vertices in communities of size >= {min_comm_size}, "
            f"found {len(pool)} (short by {anchors - len(pool)})"
        )
    return np.sort(substream(seed, 0).choice(pool, size=anchors, replace=False))


def build_training_pairs(g: Graph, cs: CommunitySet, anchors=50, min_comm_size=20, seed=0):
    """All pairs ``(a, u)``, ``u != a``, for sampled anchors ``a``.

    Returns ``(pairs, labels)`` with ``pairs`` of shape ``(anchors*(n-1), 2)``.
    """
    chosen = sample_anchors(cs, anchors, min_comm_size, seed)
    n = g.node_count
    pairs, labels = [], []
    for a in chosen:
        others = np.delete(np.arange(n), a)
        pairs.append(np.column_stack([np.full(n - 1, a), others]))
        labels.append(cs.partner_mask(a)[others])
    return np.vstack(pairs), np.concatenate(labels)


# -- scorers ------------------------------------------------------------------


class DotScorer:
    tag = "dot"

    def __init__(self, embedding: Embedding):
        self.embedding = embedding

    def score(self, u, v) -> float:
        return dot_score(self.embedding, u, v)

    def scores_from(self, v) -> np.ndarray:
        V = self.embedding.vectors
        return V.T @ V[:, v]


class HadamardScorer:
    tag = "hadamard-lr"

    def __init__(self, embedding: Embedding, model: LogisticModel):
        self.embedding = embedding
        self.model = model

    @classmethod
    def train(cls, embedding, g, cs, anchors=50, min_comm_size=20, seed=0, **lr_kwargs):
        pairs, labels = build_training_pairs(g, cs, anchors, min_comm_size, seed)
        V = embedding.vectors
        X = V[:, pairs[:, 0]].T * V[:, pairs[:, 1]].T
        model = train_logistic(X, labels, **lr_kwargs)
        model.provenance.update(scorer=cls.tag, anchors=anchors, seed=seed)
        return cls(embedding, model)

    def score(self, u, v) -> float:
        return float(self.model.predict_proba(hadamard_features(self.embedding, u, v))[0])

    def scores_from(self, v) -> np.ndarray:
        V = self.embedding.vectors
        return self.model.decision(V.T * V[:, v])


@dataclass(frozen=True)
class TrainConfig:
    anchors: int = 50
    min_comm_size: int = 20
    seed: int = 0
    l2_strength: float = 1e-4
    max_iters: int = 10_000
    tol: float = 1e-8


class StructuralScorer:
    """Logistic regression over the four structural pair features."""

    tag = "structural-lr"

    def __init__(self, g: Graph, ppr_cache: PprCache, model: LogisticModel):
        self.graph = g
        self.ppr = ppr_cache
        self.model = model

    def prepare(self, vertices) -> None:
        """Batch the reverse PPR sweep for vertices about to be ranked."""
        self.ppr.prepare(vertices)

    def features_from(self, v) -> np.ndarray:
        return features_from(self.graph, self.ppr, v)

    def score(self, u, v) -> float:
        x = pair_features(self.graph, self.ppr, u, v).as_array()
        return float(self.model.predict_proba(x)[0])

    def scores_from(self, v) -> np.ndarray:
        return self.model.decision(self.features_from(v))


def structural_scorer(g: Graph, cs: CommunitySet, ppr_params: PprParams = PprParams(),
                      train_config: TrainConfig = TrainConfig(), ppr_cache=None) -> StructuralScorer:
    cache = ppr_cache or PprCache(g, ppr_params)
    chosen = sample_anchors(cs, train_config.anchors, train_config.min_comm_size, train_config.seed)
    cache.prepare(chosen)
    rows, labels = [], []
    for a in chosen:
        feats = features_from(g, cache, a)
        mask = cs.partner_mask(a)
        keep = np.arange(g.node_count) != a
        rows.append(feats[keep])
        labels.append(mask[keep])
    model = train_logistic(np.vstack(rows), np.concatenate(labels), train_config.l2_strength,
                           train_config.max_iters, train_config.tol)
    model.provenance.update(scorer=StructuralScorer.tag, features=list(FEATURE_NAMES),
                            anchors=[int(a) for a in chosen], alpha=ppr_params.alpha,
                            r_max=ppr_params.r_max, seed=train_config.seed)
    return StructuralScorer(g, cache, model)
