"""Zero-shot classifiers over test-domain classes: DR, PR and DS."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .prior_learning import SemanticPrior
from .ranking_core import Ranking, kendall_topk_distance, ranking_from_scores, validate_scores
from .score_rankers import PairwiseScores, bs_ranker_log_score, pl_ranker_log_prob

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilaritySource:
    """Similarities ``matrix[z, y]`` between test class ``z`` and training class ``y``."""

    name: str
    matrix: np.ndarray
    test_classes: tuple[str, ...]
    train_classes: tuple[str, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        object.__setattr__(self, "test_classes", tuple(self.test_classes))
        object.__setattr__(self, "train_classes", tuple(self.train_classes))
        if m.shape != (len(self.test_classes), len(self.train_classes)):
            raise ValueError(
                f"similarity {self.name!r}: matrix shape {m.shape} does not match axes "
                f"({len(self.test_classes)}, {len(self.train_classes)})")
        if not np.all(np.isfinite(m)):
            raise ValueError(f"similarity {self.name!r} has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def row(self, z: str) -> np.ndarray:
        try:
            return self.matrix[self.test_classes.index(z)]
        except ValueError:
            raise KeyError(f"unknown test class {z!r} in source {self.name!r}") from None


@dataclass(frozen=True)
class DsConfig:
    top_m: int = 5
    train_prior: np.ndarray | None = None


@dataclass
class Prediction:
    index: int
    label: str
    scores: np.ndarray = field(repr=False)


def _minmax(m: np.ndarray) -> np.ndarray:
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def aggregate_similarities(sources: Sequence[SimilaritySource],
                           method: Literal["arithmetic", "geometric"] = "arithmetic",
                           name: str | None = None) -> SimilaritySource:
    """Min-max normalize each source to [0, 1] and average entrywise."""
    if not sources:
        raise ValueError("need at least one similarity source")
    first = sources[0]
    for s in sources[1:]:
        if s.test_classes != first.test_classes or s.train_classes != first.train_classes:
            raise ValueError(f"source {s.name!r} is not aligned with {first.name!r}")
    stack = np.stack([_minmax(s.matrix) for s in sources])
    if method == "arithmetic":
        agg = stack.mean(axis=0)
    elif method == "geometric":
        with np.errstate(divide="ignore"):
            agg = np.exp(np.log(stack).mean(axis=0))
    else:
        raise ValueError(f"unknown aggregation {method!r}")
    return SimilaritySource(name or f"{method}_mean", agg, first.test_classes,
                            first.train_classes)


def similarity_to_ranking(src: SimilaritySource, z: str) -> Ranking:
    """Training classes sorted by descending similarity to test class ``z``."""
    return ranking_from_scores(src.row(z))


def similarity_priors(src: SimilaritySource) -> list[Ranking]:
    return [similarity_to_ranking(src, z) for z in src.test_classes]


def _consensus(priors: SemanticPrior | Sequence[Ranking]) -> tuple[list[Ranking], list[str]]:
    if isinstance(priors, SemanticPrior):
        return priors.consensus_list(), list(priors.classes)
    rankings = list(priors)
    return rankings, [str(i) for i in range(len(rankings))]


def dr_classify(x_ranking: Ranking, priors: SemanticPrior | Sequence[Ranking],
                k: int = 4) -> Prediction:
    """Nearest prior consensus under the top-K Kendall distance."""
    modes, labels = _consensus(priors)
    if not modes:
        raise ValueError("no priors to classify against")
    xk = x_ranking.top(k)
    d = np.array([kendall_topk_distance(xk, m.top(k)) for m in modes], dtype=float)
    best = int(np.argmin(d))
    return Prediction(best, labels[best], d)


def pr_classify(scores, priors: SemanticPrior | Sequence[Ranking], k: int = 4) -> Prediction:
    """MAP test class with a point-mass prior on each class consensus.

    A score vector uses the Plackett-Luce ranker; :class:`PairwiseScores`
    uses the Babington-Smith ranker.
    """
    modes, labels = _consensus(priors)
    if not modes:
        raise ValueError("no priors to classify against")
    if isinstance(scores, PairwiseScores):
        logp = np.array([bs_ranker_log_score(scores, m.top(k)) for m in modes])
    else:
        s = validate_scores(scores)
        logp = np.array([pl_ranker_log_prob(s, m.top(k)) for m in modes])
    best = int(np.argmax(logp))
    return Prediction(best, labels[best], logp)


def ds_classify(class_probs, sim: SimilaritySource, cfg: DsConfig = DsConfig()) -> Prediction:
    """Direct-similarity rule over the ``top_m`` most similar training classes.

    ``score_z = sum_k y_k (log P(y_k|x) - log P(y_k))`` with weights
    ``y_k = w_k / sum w`` over the chosen classes.
    """
    p = np.asarray(class_probs, dtype=float)
    c = len(sim.train_classes)
    if p.shape != (c,):
        raise ValueError(f"expected {c} class probabilities, got shape {p.shape}")
    if np.any(p <= 0) or np.any(p > 1):
        raise ValueError("class probabilities must lie in (0, 1]")
    if not 1 <= cfg.top_m <= c:
        raise ValueError(f"top_m must be in 1..{c}")
    prior = np.full(c, 1.0 / c) if cfg.train_prior is None else np.asarray(cfg.train_prior)
    log_ratio = np.log(p) - np.log(prior)
    scores = np.empty(len(sim.test_classes))
    for zi, row in enumerate(sim.matrix):
        top = ranking_from_scores(row).order[: cfg.top_m]
        w = row[list(top)]
        total = w.sum()
        if total == 0:
            logger.warning("zero similarity mass for test class %r", sim.test_classes[zi])
            scores[zi] = -np.inf
            continue
        scores[zi] = (w / total) @ log_ratio[list(top)]
    best = int(np.argmax(scores))
    return Prediction(best, sim.test_classes[best], scores)
