"""Executable forms of the community-pair bounds for Gram and softmax
factorizations.

A pair ``i < j`` is a community pair of a similarity matrix ``M`` at level
``epsilon`` when both ``M[i, j]`` and ``M[j, i]`` are at least ``epsilon``.

For ``nsm(V)``, the row-normalized ``exp(V^T V)``, the pair test needs only
the row log-normalizers: ``S_ij - max(lse_i, lse_j) >= ln(epsilon)`` with
``S = V^T V``.  The helpers below use that form to work on row chunks and
never hold more than ``chunk x n`` scores at once.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import logsumexp

from ._random import substream
from .embed import Embedding
from .errors import DomainError, NumericError
from .proximity import DENSE_GUARD, check_dense

log = logging.getLogger(__name__)

ROW_TOL = 1e-9
CHUNK = 1024


def _matrix(e) -> np.ndarray:
    return e.vectors if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)


# -- normalized softmax -------------------------------------------------------


def nsm(e, guard=DENSE_GUARD) -> np.ndarray:
    """``nsm(V)[i, j] = exp(v_i . v_j) / sum_k exp(v_i . v_k)``, with ``k``
    running over every node including ``i`` itself."""
    V = _matrix(e)
    check_dense(V.shape[1], guard, "normalized softmax matrix")
    S = V.T @ V
    if not np.all(np.isfinite(S)):
        raise NumericError("non-finite dot products in nsm")
    S -= S.max(axis=1, keepdims=True)
    np.exp(S, out=S)
    S /= S.sum(axis=1, keepdims=True)
    return S


def row_log_normalizers(V, chunk=CHUNK) -> np.ndarray:
    """``lse_i = log sum_k exp(v_i . v_k)`` for every column of ``V``."""
    n = V.shape[1]
    out = np.empty(n)
    for lo in range(0, n, chunk):
        S = V[:, lo:lo + chunk].T @ V
        if not np.all(np.isfinite(S)):
            raise NumericError("non-finite dot products in nsm")
        out[lo:lo + chunk] = logsumexp(S, axis=1)
    return out


def softmax_community_pairs(e, epsilon, chunk=CHUNK):
    """Community pairs of ``nsm(V)`` as ``(i, j)`` arrays with ``i < j``."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    V = _matrix(e)
    n = V.shape[1]
    lse = row_log_normalizers(V, chunk)
    log_eps = math.log(epsilon)
    rows, cols = [], []
    for lo in range(0, n, chunk):
        S = V[:, lo:lo + chunk].T @ V
        ok = S - np.maximum(lse[lo:lo + chunk, None], lse[None, :]) >= log_eps
        i, j = np.nonzero(ok)
        i += lo
        keep = i < j
        rows.append(i[keep])
        cols.append(j[keep])
    return np.concatenate(rows), np.concatenate(cols)


# -- Gram factorizations ------------------------------------------------------


@dataclass(frozen=True)
class GramRowCheck:
    passes: bool  # max absolute row sum within 1 (the hypothesis as used)
    max_row_sum: float  # max_i sum_j |(V^T V)_ij|
    max_signed_row_sum: float  # max_i |sum_j (V^T V)_ij|
    signed_passes: bool


def gram_row_check(e, guard=DENSE_GUARD) -> GramRowCheck:
    """Row-sum hypothesis for ``V^T V``.

    The spectral bound behind the pair count needs absolute row sums
    ``sum_j |M_ij|`` (Gershgorin); the signed row sums are reported as well
    but do not bound the spectrum on their own.
    """
    V = _matrix(e)
    check_dense(V.shape[1], guard, "Gram matrix")
    G = V.T @ V
    abs_max = float(np.abs(G).sum(axis=1).max(initial=0.0))
    signed_max = float(np.abs(G.sum(axis=1)).max(initial=0.0))
    return GramRowCheck(abs_max <= 1 + ROW_TOL, abs_max, signed_max, signed_max <= 1 + ROW_TOL)


def rescale_to_row_bound(e, guard=DENSE_GUARD) -> Embedding:
    """Divide ``V`` by ``sqrt(max absolute row sum)`` when it exceeds one."""
    V = _matrix(e)
    top = gram_row_check(V, guard).max_row_sum
    method = e.method if isinstance(e, Embedding) else "matrix"
    params = dict(e.params) if isinstance(e, Embedding) else {}
    scale = math.sqrt(top) if top > 1 else 1.0
    return Embedding(V / scale, method, {**params, "row_rescale": scale})


@dataclass
class CommunityPairCount:
    epsilon: float
    count: int
    n: int
    bound: float | None = None
    pairs: list | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DomainError("epsilon must be positive")


def count_community_pairs(m, epsilon, keep_pairs=False) -> CommunityPairCount:
    """Unordered pairs ``i < j`` with ``min(m[i, j], m[j, i]) >= epsilon``."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError("community pairs need a square matrix")
    ok = np.triu(np.minimum(m, m.T) >= epsilon, k=1)
    i, j = np.nonzero(ok)
    pairs = [(int(a), int(b)) for a, b in zip(i, j)] if keep_pairs else None
    return CommunityPairCount(float(epsilon), int(len(i)), m.shape[0], None, pairs)


@dataclass(frozen=True)
class GramBoundReport:
    epsilon: float
    d: int
    n: int
    count: int
    bound: float
    slack: float
    holds: bool
    max_row_sum: float
    row_rescale: float

    def to_dict(self) -> dict:
        return asdict(self)


def gram_pair_bound(d, epsilon) -> float:
    return d / (2.0 * epsilon * epsilon)


def verify_gram_bound(e, epsilon, rescale=False, guard=DENSE_GUARD) -> GramBoundReport:
    """Count community pairs of ``V^T V`` and compare with ``d / (2 eps^2)``.

    A report with ``holds=False`` on a hypothesis-satisfying ``V`` would mean
    a bug here, not a counterexample.
    """
    if not isinstance(e, Embedding):
        e = Embedding(np.asarray(e, dtype=np.float64), "matrix")
    scale = 1.0
    if rescale:
        e = rescale_to_row_bound(e, guard)
        scale = e.params["row_rescale"]
    check = gram_row_check(e, guard)
    if not check.passes:
        raise DomainError(
            f"max absolute row sum of V^T V is {check.max_row_sum:.6g} > 1; rescale first"
        )
    count = count_community_pairs(e.gram(), epsilon).count
    bound = gram_pair_bound(e.dim, epsilon)
    return GramBoundReport(float(epsilon), e.dim, e.n, count, bound, bound - count,
                           count <= bound, check.max_row_sum, scale)


def _campaign_instance(rng, max_n, max_d) -> np.ndarray:
    """Draw a ``d x n`` matrix from a mix of shapes: plain Gaussian, a few
    tight clusters (which pack many large Gram entries) and nonnegative."""
    n = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    kind = rng.integers(3)
    if kind == 0:
        return rng.standard_normal((d, n))
    if kind == 1:
        centers = rng.standard_normal((d, int(rng.integers(1, d + 2))))
        assign = rng.integers(centers.shape[1], size=n)
        return centers[:, assign] + 0.05 * rng.standard_normal((d, n))
    return np.abs(rng.standard_normal((d, n))) * (rng.random(n) < 0.5)


@dataclass
class CampaignReport:
    instances: int
    epsilons: list
    checks: int
    violations: int
    max_count_to_bound: float
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def gram_bound_campaign(instances=10_000, max_n=64, max_d=8, epsilons=(0.05, 0.1, 0.2), seed=0) -> CampaignReport:
    """Random row-rescaled embeddings checked against ``d / (2 eps^2)``."""
    violations = checks = 0
    worst = 0.0
    for t in range(instances):
        e = rescale_to_row_bound(_campaign_instance(substream(seed, t), max_n, max_d))
        for eps in epsilons:
            r = verify_gram_bound(e, eps)
            checks += 1
            violations += not r.holds
            worst = max(worst, r.count / r.bound)
    return CampaignReport(instances, list(epsilons), checks, violations, worst, seed)


# -- block construction -------------------------------------------------------


def _block_intra_log_min(U, b) -> float:
    """Smallest log nsm entry inside any block when block ``t`` of ``b``
    vertices shares column ``t`` of ``U``."""
    G = U.T @ U
    lse = logsumexp(G + math.log(b), axis=1)
    return float(np.min(np.diag(G) - lse))


def block_construction(n, b, c, seed=0, max_redraws=100) -> Embedding:
    """``n/b`` random directions of norm ``2 sqrt(ln n)`` in dimension
    ``ceil(c ln n)``; every vertex of block ``t`` gets vector ``t``.

    Draws that leave an intra-block nsm entry below ``1/(2b)`` are redrawn
    and counted in ``params['redraws']``.
    """
    if n < 2 or b < 1 or n % b:
        raise DomainError(f"block size {b} must divide n={n}")
    d = math.ceil(c * math.log(n))
    if d < 1:
        raise DomainError(f"c={c} gives dimension {d}")
    blocks = n // b
    radius = 2.0 * math.sqrt(math.log(n))
    target = math.log(1.0 / (2 * b))
    for attempt in range(max_redraws + 1):
        U = substream(seed, attempt).standard_normal((d, blocks))
        U *= radius / np.linalg.norm(U, axis=0)
        if _block_intra_log_min(U, b) >= target:
            break
        log.info("block construction draw %d missed 1/(2b); redrawing", attempt)
    else:
        raise NumericError(f"no valid block construction after {max_redraws} redraws")
    V = np.repeat(U, b, axis=1)
    return Embedding(V, "block-construction",
                     {"n": n, "b": b, "c": c, "d": d, "seed": seed, "redraws": attempt})


# -- perturbation -------------------------------------------------------------


@dataclass(frozen=True)
class PerturbParams:
    delta: float
    trials: int = 20
    seed: int = 0

    def __post_init__(self):
        # delta = 0 is admitted as the identity baseline of a sweep
        if not self.delta >= 0:
            raise DomainError("delta must be non-negative")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")


def perturb(e: Embedding, params: PerturbParams, trial=0) -> Embedding:
    """Scale column ``i`` by ``exp(X_i)``, ``X_i ~ N(0, delta^2)``, drawn
    from substream ``(seed, trial)``."""
    X = substream(params.seed, trial).normal(0.0, 1.0, e.n) * params.delta
    return Embedding(e.vectors * np.exp(X)[None, :], e.method,
                     {**e.params, "delta": params.delta, "perturb_seed": params.seed, "trial": trial})


@dataclass
class SurvivalReport:
    epsilon: float
    delta: float
    trials: int
    seed: int
    initial_pairs: int
    survival: list  # per trial

    @property
    def mean(self) -> float:
        return float(np.mean(self.survival))

    def to_dict(self) -> dict:
        return {**asdict(self), "mean": self.mean}


def _surviving(V, rows, cols, epsilon, chunk) -> int:
    lse = row_log_normalizers(V, chunk)
    s = np.einsum("ij,ij->j", V[:, rows], V[:, cols])
    return int(np.count_nonzero(s - np.maximum(lse[rows], lse[cols]) >= math.log(epsilon)))


def survival_experiment(e: Embedding, epsilon, params: PerturbParams, workers=1,
                        chunk=CHUNK, pairs=None) -> SurvivalReport:
    """Fraction of the community pairs of ``nsm(V)`` that are still community
    pairs after each independent perturbation."""
    check_dense(e.n, DENSE_GUARD, "survival experiment")
    rows, cols = pairs if pairs is not None else softmax_community_pairs(e, epsilon, chunk)
    if len(rows) == 0:
        raise DomainError(f"no community pairs at epsilon={epsilon}")
    if params.delta == 0:
        return SurvivalReport(float(epsilon), 0.0, params.trials, params.seed, len(rows), [1.0] * params.trials)

    def one(t):
        return _surviving(perturb(e, params, t).vectors, rows, cols, epsilon, chunk) / len(rows)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            survival = list(pool.map(one, range(params.trials)))
    else:
        survival = [one(t) for t in range(params.trials)]
    return SurvivalReport(float(epsilon), float(params.delta), params.trials, params.seed, len(rows), survival)


DEFAULT_DELTAS = (0.0, 0.001, 0.01, 0.05, 0.1, 0.2)


def delta_sweep(e: Embedding, epsilon, deltas=DEFAULT_DELTAS, trials=20, seed=0, workers=1) -> list:
    pairs = softmax_community_pairs(e, epsilon)
    return [survival_experiment(e, epsilon, PerturbParams(dl, trials, seed), workers, pairs=pairs)
            for dl in deltas]


def write_sweep_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "mean_survival", "min_survival", "max_survival", "trials", "initial_pairs"])
        for r in reports:
            w.writerow([repr(r.delta), repr(r.mean), repr(min(r.survival)), repr(max(r.survival)),
                        r.trials, r.initial_pairs])


def sweep_svg(reports, title="") -> str:
    from .plotting import line_chart_svg

    pts = [(r.delta, r.mean) for r in reports if r.delta > 0]
    return line_chart_svg({"mean survival": pts}, title=title, xlabel="delta (log scale)",
                          ylabel="surviving community pairs", ylim=(0.0, 1.0), log_x=True)


# -- vector length diagnostics ------------------------------------------------


BELOW_REGIME = "below lemma regime"


def lemma_thresholds(n, epsilon):
    """``(length_bound, difference_bound)``, or ``None`` when
    ``ln(epsilon n / 100) <= 0`` and the bounds are undefined."""
    big = math.log(epsilon * n / 100.0)
    if big <= 0:
        return None
    root = math.sqrt(big)
    return root / 2.0, 2.0 * math.log(1.0 / epsilon) / root


@dataclass
class LengthReport:
    n: int
    epsilon: float
    pairs: int
    regime: str  # "ok" or BELOW_REGIME
    length_bound: float | None
    difference_bound: float | None
    fraction_length: float | None
    fraction_difference: float | None
    fraction_both: float | None
    vertex_fraction: float | None  # vertices all of whose pairs satisfy both
    min_norm: float | None
    max_difference: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def length_diagnostics(e: Embedding, epsilon, chunk=CHUNK) -> LengthReport:
    """Norms over the community pairs of ``nsm(V)`` against the length lower
    bound and the length-difference upper bound.  Both endpoints of a pair
    must meet the length bound."""
    check_dense(e.n, DENSE_GUARD, "length diagnostics")
    rows, cols = softmax_community_pairs(e, epsilon, chunk)
    norms = np.linalg.norm(e.vectors, axis=0)
    ni, nj = norms[rows], norms[cols]
    diff = np.abs(ni - nj)
    stats = {
        "min_norm": float(np.minimum(ni, nj).min()) if len(rows) else None,
        "max_difference": float(diff.max()) if len(rows) else None,
    }
    th = lemma_thresholds(e.n, epsilon)
    if th is None:
        log.warning("ln(epsilon n / 100) = %.4g <= 0: %s", math.log(epsilon * e.n / 100.0), BELOW_REGIME)
        return LengthReport(e.n, float(epsilon), len(rows), BELOW_REGIME, None, None,
                            None, None, None, None, **stats)
    length_bound, diff_bound = th
    if not len(rows):
        return LengthReport(e.n, float(epsilon), 0, "ok", length_bound, diff_bound,
                            None, None, None, None, **stats)
    ok_len = np.minimum(ni, nj) >= length_bound
    ok_diff = diff <= diff_bound
    both = ok_len & ok_diff
    bad = np.zeros(e.n, dtype=bool)
    bad[rows[~both]] = True
    bad[cols[~both]] = True
    return LengthReport(e.n, float(epsilon), len(rows), "ok", length_bound, diff_bound,
                        float(ok_len.mean()), float(ok_diff.mean()), float(both.mean()),
                        float(1.0 - bad.mean()), **stats)
