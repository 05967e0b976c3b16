"""Rankers built from pre-trained classifier scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ranking_core import Ranking, TopKList, as_topk, validate_scores
from .ranking_models import BabingtonSmithModel, bs_log_score, pl_log_prob_theta


@dataclass(frozen=True)
class PairwiseScores:
    """One-vs-one scores as an antisymmetric matrix: ``matrix[i, j] = f_ij = -f_ji``.

    A positive ``f_ij`` favours item ``i`` over item ``j``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        f = np.array(self.matrix, dtype=float)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError("pairwise scores must be a square matrix")
        if not np.all(np.isfinite(f)):
            raise ValueError("pairwise scores must be finite")
        upper = np.triu(f, 1)
        f = upper - upper.T
        f.setflags(write=False)
        object.__setattr__(self, "matrix", f)

    @classmethod
    def from_upper(cls, c: int, upper) -> "PairwiseScores":
        """Build from a mapping ``(i, j) -> f_ij`` with ``i < j`` or a vector
        ordered like ``np.triu_indices(c, 1)``."""
        f = np.zeros((c, c))
        if isinstance(upper, dict):
            for (i, j), v in upper.items():
                if not i < j:
                    raise ValueError(f"expected i < j, got ({i}, {j})")
                f[i, j] = v
        else:
            f[np.triu_indices(c, 1)] = np.asarray(upper, dtype=float)
        return cls(f)

    @classmethod
    def from_differences(cls, g) -> "PairwiseScores":
        g = np.asarray(g, dtype=float)
        return cls(g[:, None] - g[None, :])

    @property
    def universe_size(self) -> int:
        return self.matrix.shape[0]


def pl_ranker_log_prob(scores, t: TopKList | Ranking) -> float:
    """log P(t | x) with Plackett-Luce weights ``v_i = exp(f_i(x))``."""
    return pl_log_prob_theta(validate_scores(scores), as_topk(t))


def bs_ranker_log_score(p: PairwiseScores, t: TopKList | Ranking) -> float:
    """Unnormalized log P(t | x) with Babington-Smith weights ``v_ij = exp(f_ij(x))``."""
    return bs_log_score(BabingtonSmithModel(p.matrix), t)


def deterministic_rank_ovo(p: PairwiseScores) -> Ranking:
    """Copeland ordering of one-vs-one outcomes.

    Items are sorted by number of pairwise wins, then by total score
    margin, then by index.
    """
    f = p.matrix
    wins = (f > 0).sum(axis=1)
    margin = f.sum(axis=1)
    order = np.lexsort((np.arange(f.shape[0]), -margin, -wins))
    return Ranking(tuple(order))
