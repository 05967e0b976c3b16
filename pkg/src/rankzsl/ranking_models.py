"""Plackett-Luce, Mallows and Babington-Smith models over top-K lists.

Everything is evaluated in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import logsumexp

from .ranking_core import (
    DimensionError,
    Ranking,
    TopKList,
    as_topk,
)


def _check_universe(c: int, t: TopKList):
    if t.universe_size != c:
        raise DimensionError(f"model over {c} items, list over {t.universe_size}")


@dataclass(frozen=True)
class PlackettLuceModel:
    """Stagewise choice model with weights ``v = exp(log_weights)``."""

    log_weights: np.ndarray

    def __post_init__(self):
        theta = np.array(self.log_weights, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise ValueError("log_weights must be a finite 1-D array")
        theta.setflags(write=False)
        object.__setattr__(self, "log_weights", theta)

    @property
    def universe_size(self) -> int:
        return self.log_weights.size

    def to_dict(self, k: int | None = None) -> dict[str, Any]:
        return {"model": "plackett_luce", "C": self.universe_size, "K": k,
                "log_weights": self.log_weights.tolist()}


@dataclass(frozen=True)
class MallowsModel:
    """Top-K Mallows model with mode ``mode`` and spread ``spread``."""

    mode: Ranking
    spread: float
    k: int

    def __post_init__(self):
        if not self.spread >= 0:
            raise ValueError(f"spread must be >= 0, got {self.spread}")
        if not 1 <= self.k <= self.mode.size:
            raise ValueError(f"need 1 <= K <= C, got K={self.k}")

    @property
    def universe_size(self) -> int:
        return self.mode.size

    def to_dict(self) -> dict[str, Any]:
        return {"model": "mallows", "C": self.universe_size, "K": self.k,
                "mode": list(self.mode.order), "lambda": float(self.spread)}


@dataclass(frozen=True)
class BabingtonSmithModel:
    """Pairwise-odds model; ``log_pair_weights[i, j] = log v_ij = -log v_ji``."""

    log_pair_weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.log_pair_weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("log_pair_weights must be square")
        if not np.all(np.isfinite(w)):
            raise ValueError("log_pair_weights must be finite")
        upper = np.triu(w, 1)
        w = upper - upper.T
        w.setflags(write=False)
        object.__setattr__(self, "log_pair_weights", w)

    @classmethod
    def from_upper(cls, c: int, upper: dict[tuple[int, int], float]) -> "BabingtonSmithModel":
        w = np.zeros((c, c))
        for (i, j), value in upper.items():
            if not i < j:
                raise ValueError(f"expected i < j, got ({i}, {j})")
            w[i, j] = value
        return cls(w)

    @property
    def universe_size(self) -> int:
        return self.log_pair_weights.shape[0]

    def to_dict(self, k: int | None = None) -> dict[str, Any]:
        i, j = np.triu_indices(self.universe_size, 1)
        return {"model": "babington_smith", "C": self.universe_size, "K": k,
                "log_pair_weights": {f"{a},{b}": float(self.log_pair_weights[a, b])
                                     for a, b in zip(i, j)}}


def model_from_dict(d: dict[str, Any]):
    kind = d["model"]
    if kind == "plackett_luce":
        return PlackettLuceModel(np.array(d["log_weights"], dtype=float))
    if kind == "mallows":
        return MallowsModel(Ranking(tuple(d["mode"])), float(d["lambda"]), int(d["K"]))
    if kind == "babington_smith":
        upper = {tuple(int(x) for x in key.split(",")): v
                 for key, v in d["log_pair_weights"].items()}
        return BabingtonSmithModel.from_upper(int(d["C"]), upper)
    raise ValueError(f"unknown model kind {kind!r}")


# -- Plackett-Luce -----------------------------------------------------------

def pl_log_prob_theta(theta: np.ndarray, t: TopKList) -> float:
    theta = np.asarray(theta, dtype=float)
    _check_universe(theta.size, t)
    remaining = np.ones(theta.size, dtype=bool)
    logp = 0.0
    for item in t.prefix:
        logp += theta[item] - logsumexp(theta[remaining])
        remaining[item] = False
    return float(logp)


def pl_log_prob(m: PlackettLuceModel, t: TopKList | Ranking) -> float:
    """Log-probability of a top-K list under a Plackett-Luce model."""
    return pl_log_prob_theta(m.log_weights, as_topk(t))


def _categorical(rng: np.random.Generator, logits: np.ndarray) -> np.ndarray:
    """One draw per row of ``logits`` (``-inf`` entries are never drawn)."""
    p = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    cdf = np.cumsum(p, axis=1)
    u = rng.random((logits.shape[0], 1)) * cdf[:, -1:]
    idx = (cdf <= u).sum(axis=1)
    # guard against round-off selecting a zero-probability tail entry
    return np.minimum(idx, logits.shape[1] - 1)


def pl_sample_many(m: PlackettLuceModel, k: int, n: int, seed=None) -> list[TopKList]:
    """``n`` independent draws; each stage picks a remaining item with
    probability proportional to its weight."""
    c = m.universe_size
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= K <= C, got K={k}, C={c}")
    rng = np.random.default_rng(seed)
    logits = np.tile(m.log_weights, (n, 1))
    out = np.empty((n, k), dtype=np.int64)
    rows = np.arange(n)
    for stage in range(k):
        picked = _categorical(rng, logits)
        out[:, stage] = picked
        logits[rows, picked] = -np.inf
    return [TopKList(tuple(row), c) for row in out]


def pl_sample(m: PlackettLuceModel, k: int, seed=None) -> TopKList:
    """Draw K items without replacement, each stage proportional to ``v``."""
    return pl_sample_many(m, k, 1, seed)[0]


# -- Mallows -----------------------------------------------------------------

def _log_ratio_term(lam: float, m: int) -> float:
    """log((1 - e^{-m lam}) / (1 - e^{-lam})), continuous at lam = 0."""
    if lam == 0:
        return math.log(m)
    return math.log(-math.expm1(-m * lam)) - math.log(-math.expm1(-lam))


def mallows_log_phi(lam: float, c: int, k: int) -> float:
    """Log normalizer of the top-K Mallows model."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if not 1 <= k <= c:
        raise ValueError(f"need 1 <= K <= C, got K={k}, C={c}")
    return float(sum(_log_ratio_term(lam, c - j + 1) for j in range(1, k + 1)))


def mallows_dlog_phi(lam: float, c: int, k: int) -> float:
    """Derivative of :func:`mallows_log_phi` in ``lam``; equals ``-E[sum V_j]``."""
    total = 0.0
    for j in range(1, k + 1):
        m = c - j + 1
        if lam == 0:
            total -= (m - 1) / 2.0
        else:
            # m / (e^{m lam} - 1), written to stay finite for large m lam
            total += (m * math.exp(-m * lam) / -math.expm1(-m * lam)
                      - math.exp(-lam) / -math.expm1(-lam))
    return total


def insertion_vector(t: TopKList, mode: Ranking) -> np.ndarray:
    """``V_1..V_K`` of ``t`` relative to ``mode``.

    ``V_j`` counts items not among the first ``j`` of ``t`` that ``mode``
    ranks ahead of the item ``t`` places at position ``j``.
    """
    _check_universe(mode.size, t)
    rank0 = mode.positions()
    remaining = np.ones(mode.size, dtype=bool)
    v = np.empty(t.k, dtype=np.int64)
    for j, item in enumerate(t.prefix):
        remaining[item] = False
        v[j] = np.count_nonzero(remaining & (rank0 < rank0[item]))
    return v


def mallows_log_prob(m: MallowsModel, t: TopKList | Ranking) -> float:
    """Log-probability of a top-K list under the top-K Mallows model."""
    t = as_topk(t)
    if t.k != m.k:
        raise DimensionError(f"model is top-{m.k}, list is top-{t.k}")
    s = int(insertion_vector(t, m.mode).sum())
    return -m.spread * s - mallows_log_phi(m.spread, m.universe_size, m.k)


def mallows_sample_many(m: MallowsModel, n: int, seed=None) -> list[Ranking]:
    """``n`` exact draws of full rankings from the Mallows model.

    Each ``V_j`` is drawn independently from the truncated geometric law
    ``P(V_j = r) ~ exp(-lam r)``, ``r = 0..C-j``; position ``j`` then receives
    the remaining item that has exactly ``V_j`` remaining items ahead of it
    in the mode.
    """
    rng = np.random.default_rng(seed)
    c = m.universe_size
    r = np.arange(c)
    draws = np.empty((n, c), dtype=np.int64)
    for j in range(1, c + 1):
        logits = np.where(r <= c - j, -m.spread * r, -np.inf)
        draws[:, j - 1] = _categorical(rng, np.tile(logits, (n, 1)))
    out = []
    for row in draws:
        remaining = list(m.mode.order)
        out.append(Ranking(tuple(remaining.pop(v) for v in row)))
    return out


def mallows_sample(m: MallowsModel, seed=None) -> Ranking:
    """Exact draw of one full ranking around ``m.mode``."""
    return mallows_sample_many(m, 1, seed)[0]


# -- Babington-Smith ---------------------------------------------------------

def bs_log_score(m: BabingtonSmithModel, t: TopKList | Ranking) -> float:
    """Unnormalized log-probability of a top-K list.

    Only differences between lists are meaningful; the normalizer is not
    computed.
    """
    t = as_topk(t)
    w = m.log_pair_weights
    _check_universe(w.shape[0], t)
    remaining = np.ones(w.shape[0], dtype=bool)
    score = 0.0
    for item in t.prefix:
        remaining[item] = False
        score += w[item, remaining].sum()
    return float(score)
