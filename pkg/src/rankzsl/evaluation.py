"""Evaluation protocols: ranking discriminability, crowd LOO Bayes, zero-shot accuracy."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .baseline_classifiers import (
    Dataset,
    LinearSuite,
    fit_binary_suite,
    fit_multinomial_logistic,
    predict_proba,
    predict_score_matrix,
)
from .prior_learning import (
    FitConfig,
    RankingSample,
    SemanticPrior,
    fit_class_prior,
    learn_priors,
    log_likelihood_under,
)
from .ranking_core import Ranking, kendall_topk_distance, ranking_from_scores
from .score_rankers import PairwiseScores, deterministic_rank_ovo
from .zero_shot import (
    DsConfig,
    SimilaritySource,
    aggregate_similarities,
    dr_classify,
    ds_classify,
    pr_classify,
    similarity_priors,
)

logger = logging.getLogger(__name__)

Metric = Literal["euclidean", "euclidean_normalized", "kendall_topk"]


def pairwise_distances(sources: Sequence[SimilaritySource], metric: Metric = "kendall_topk",
                       k: int = 2) -> tuple[np.ndarray, list[tuple[str, str]]]:
    """Distances between all (source, test class) similarity rows.

    Returns the matrix and the ``(source name, test class)`` label per row.
    """
    rows, labels = [], []
    for src in sources:
        for z, row in zip(src.test_classes, src.matrix):
            rows.append(row)
            labels.append((src.name, z))
    x = np.array(rows)
    if metric in ("euclidean", "euclidean_normalized"):
        if metric == "euclidean_normalized":
            norm = np.abs(x).sum(axis=1, keepdims=True)
            x = x / np.where(norm == 0, 1.0, norm)
        d = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    elif metric == "kendall_topk":
        tops = [ranking_from_scores(r).top(k) for r in x]
        n = len(tops)
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = kendall_topk_distance(tops[i], tops[j])
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return d, labels


def loo_1nn_discriminability(sources: Sequence[SimilaritySource], metric: Metric = "kendall_topk",
                             k: int = 2) -> float:
    """Leave-one-out 1-NN accuracy of predicting a row's test class from the others."""
    if len(sources) < 2:
        raise ValueError("need at least 2 sources so every class has 2 items")
    d, labels = pairwise_distances(sources, metric, k)
    cls = [z for _, z in labels]
    np.fill_diagonal(d, np.inf)
    nearest = np.argmin(d, axis=1)
    return float(np.mean([cls[i] == cls[j] for i, j in enumerate(nearest)]))


def loo_bayes_ranking(samples: Sequence[RankingSample], test_classes: Sequence[str],
                      model_kind: Literal["pl", "mallows"] = "mallows", k: int = 5,
                      cfg: FitConfig = FitConfig()) -> float:
    """Hold out each ranking, refit its class, and predict by maximum likelihood."""
    grouped: dict[str, list] = defaultdict(list)
    for s in samples:
        grouped[s.test_class].append(s.ranking.truncate(k))
    c = samples[0].ranking.universe_size
    full = {z: fit_class_prior(grouped[z], c, model_kind, cfg) for z in test_classes
            if grouped[z]}
    correct = total = 0
    for zi, z in enumerate(test_classes):
        lists = grouped[z]
        if len(lists) < 2:
            logger.warning("test class %r has %d ranking(s); skipped", z, len(lists))
            continue
        for n, held in enumerate(lists):
            refit = fit_class_prior(lists[:n] + lists[n + 1:], c, model_kind, cfg)
            scores = [log_likelihood_under(refit if y == z else full[y], held)
                      if y in full else -np.inf for y in test_classes]
            correct += int(np.argmax(scores) == zi)
            total += 1
    if total == 0:
        raise ValueError("no class has at least 2 rankings")
    return correct / total


@dataclass
class EvalResult:
    accuracy: float
    per_class: np.ndarray
    confusion: np.ndarray
    predictions: np.ndarray
    scores: np.ndarray = field(repr=False)


def _summarize(labels: np.ndarray, preds: np.ndarray, scores: np.ndarray,
               n_classes: int) -> EvalResult:
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)
    counts = confusion.sum(axis=1)
    per_class = np.divide(np.diag(confusion), counts, out=np.zeros(n_classes),
                          where=counts > 0)
    return EvalResult(float(np.mean(labels == preds)), per_class, confusion, preds, scores)


def sample_rankings(suite: LinearSuite, x: np.ndarray) -> list[Ranking]:
    """Deterministic ranking of training classes for each sample."""
    s = predict_score_matrix(suite, x)
    if suite.mode == "ovo":
        return [deterministic_rank_ovo(PairwiseScores(m)) for m in s]
    return [ranking_from_scores(row) for row in s]


def zero_shot_eval(method: Literal["dr", "pr", "ds"], suite: LinearSuite, test: Dataset,
                   priors: SemanticPrior | Sequence[Ranking] | None = None,
                   similarity: SimilaritySource | None = None, k: int = 4,
                   top_m: int = 5) -> EvalResult:
    """Run a zero-shot classifier over a test-domain dataset.

    DR and PR take per-class consensus rankings (``priors``); DS takes a
    similarity source.  Test labels index the classifier's class order.
    """
    n_test = test.n_classes
    if method in ("dr", "pr"):
        if priors is None:
            raise ValueError(f"{method} needs priors")
        n_priors = len(priors.classes) if isinstance(priors, SemanticPrior) else len(priors)
        if n_priors != n_test:
            raise ValueError(f"{n_priors} priors for {n_test} test classes")
        if method == "dr":
            preds = [dr_classify(r, priors, k) for r in sample_rankings(suite, test.features)]
        else:
            s = predict_score_matrix(suite, test.features)
            if suite.mode == "ovo":
                preds = [pr_classify(PairwiseScores(m), priors, k) for m in s]
            else:
                preds = [pr_classify(row, priors, k) for row in s]
    elif method == "ds":
        if similarity is None:
            raise ValueError("ds needs a similarity source")
        if list(similarity.train_classes) != list(suite.class_names):
            raise ValueError("similarity columns do not match the classifier classes")
        if len(similarity.test_classes) != n_test:
            raise ValueError("similarity rows do not match the test classes")
        probs = np.clip(predict_proba(suite, test.features), 1e-300, 1.0)
        preds = [ds_classify(p, similarity, DsConfig(top_m=top_m)) for p in probs]
    else:
        raise ValueError(f"unknown method {method!r}")
    pred_idx = np.array([p.index for p in preds], dtype=np.int64)
    scores = np.array([p.scores for p in preds])
    return _summarize(test.labels, pred_idx, scores, n_test)


def source_rankings(sources: Sequence[SimilaritySource]) -> list[RankingSample]:
    """One full ranking per (source, test class)."""
    out = []
    for src in sources:
        for z, r in zip(src.test_classes, similarity_priors(src)):
            out.append(RankingSample(z, r.top(r.size), src.name))
    return out


def fit_suite(train: Dataset, mode: str, reg: float = 1e-3, calibrate: bool | None = None):
    if mode == "multiclass":
        return fit_multinomial_logistic(train, reg)
    return fit_binary_suite(train, mode, reg, calibrate=True if calibrate is None else calibrate)


def derive_seeds(seed: int, n: int) -> list[int]:
    """Independent child seeds for the stages of one experiment."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def run_benchmark(seed: int, noise_level: float, *, n_train: int = 40, n_test: int = 10,
                  feature_dim: int = 50, samples_per_class: int = 50, n_sources: int = 5,
                  distortion: float = 0.05, k: int = 4, top_m: int = 5, reg: float = 1e-3,
                  cfg: FitConfig = FitConfig()) -> list[dict]:
    """PR, DR and DS on one seeded synthetic world; one row per method setting.

    PR uses a multiclass suite with priors fitted on the per-source rankings;
    DR uses the same suite with aggregated (or individual) sources; DS uses
    Platt-calibrated one-vs-rest probabilities.
    """
    from .synthetic import synth_similarity_sources, synth_world

    world_seed, source_seed = derive_seeds(seed, 2)
    world, train, test = synth_world(n_train, n_test, feature_dim, samples_per_class,
                                     noise_level, world_seed)
    sources = synth_similarity_sources(world, n_sources, distortion, source_seed)
    multiclass = fit_multinomial_logistic(train, reg)
    ovr = fit_binary_suite(train, "ovr", reg, calibrate=True)
    rows = []

    def add(method, suite, setting, acc):
        rows.append({"seed": seed, "noise_level": noise_level, "method": method,
                     "suite": suite, "setting": setting, "k": k, "accuracy": acc})

    rankings = source_rankings(sources)
    for model in ("pl", "mallows"):
        prior = learn_priors(rankings, world.test_classes, model, cfg)
        add("pr", "multiclass", model, zero_shot_eval("pr", multiclass, test, priors=prior,
                                                      k=k).accuracy)
    variants = {"arithm": aggregate_similarities(sources, "arithmetic"),
                "geom": aggregate_similarities(sources, "geometric")}
    for name, merged in variants.items():
        add("dr", "multiclass", name, zero_shot_eval(
            "dr", multiclass, test, priors=similarity_priors(merged), k=k).accuracy)
        add("ds", "ovr", name, zero_shot_eval("ds", ovr, test, similarity=merged,
                                              top_m=top_m).accuracy)
    add("dr", "multiclass", "indiv", float(np.mean([
        zero_shot_eval("dr", multiclass, test, priors=similarity_priors(s), k=k).accuracy
        for s in sources])))
    add("ds", "ovr", "indiv", float(np.mean([
        zero_shot_eval("ds", ovr, test, similarity=s, top_m=top_m).accuracy
        for s in sources])))
    return rows
