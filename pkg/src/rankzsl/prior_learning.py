"""Learning per-class ranking priors from observed (top-K) rankings."""

from __future__ import annotations

import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import logsumexp

from .ranking_core import (
    ORACLE_MAX_C,
    CapacityError,
    DimensionError,
    Ranking,
    TopKList,
    as_topk,
    borda_mean_ranking,
    ranking_from_scores,
)
from .ranking_models import (
    MallowsModel,
    PlackettLuceModel,
    mallows_dlog_phi,
    mallows_log_prob,
    pl_log_prob,
)

logger = logging.getLogger(__name__)

ModelKind = Literal["pl", "mallows"]


@dataclass(frozen=True)
class FitConfig:
    eta: float = 0.01
    max_iterations: int = 500
    tolerance: float = 1e-8
    consensus_max_iterations: int = 1000
    lambda_max: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class RankingSample:
    test_class: str
    ranking: TopKList
    source_tag: str = ""


def _stack(samples: Sequence[TopKList | Ranking], c: int | None = None) -> np.ndarray:
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    lists = [as_topk(s) for s in samples]
    c = lists[0].universe_size if c is None else c
    k = lists[0].k
    for t in lists:
        if t.universe_size != c or t.k != k:
            raise DimensionError(
                f"samples must share (C, K) = ({c}, {k}); got ({t.universe_size}, {t.k})")
    return np.array([t.prefix for t in lists], dtype=np.int64).reshape(len(lists), k)


# -- Plackett-Luce MLE -------------------------------------------------------

def _remaining_masks(x: np.ndarray, c: int) -> np.ndarray:
    """``mask[n, i, u]`` is True when item ``u`` is still unplaced at stage ``i``."""
    n, k = x.shape
    placed = np.zeros((n, k, c), dtype=bool)
    for i in range(1, k):
        placed[:, i] = placed[:, i - 1]
        placed[np.arange(n), i, x[:, i - 1]] = True
    return ~placed


def pl_log_likelihood(theta: np.ndarray, samples: Sequence[TopKList], c: int | None = None):
    """Plackett-Luce log-likelihood and its gradient in ``theta``."""
    theta = np.asarray(theta, dtype=float)
    x = _stack(samples, theta.size if c is None else c)
    return _pl_loglik_grad(theta, x, _remaining_masks(x, theta.size))


def _pl_loglik_grad(theta, x, masks):
    logits = np.where(masks, theta, -np.inf)
    lse = logsumexp(logits, axis=2)
    value = theta[x].sum() - lse.sum()
    probs = np.exp(logits - lse[..., None])
    grad = np.bincount(x.ravel(), minlength=theta.size) - probs.sum(axis=(0, 1))
    return float(value), grad


@dataclass
class PLFit:
    model: PlackettLuceModel
    objective: float
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)


def pl_fit(samples: Sequence[TopKList], c: int, cfg: FitConfig = FitConfig()) -> PLFit:
    """Penalized maximum likelihood for Plackett-Luce.

    Maximizes ``loglik(theta) - eta * sum(theta**2)`` with L-BFGS and the
    analytic gradient; the result is shifted to ``sum(theta) = 0``.  The
    convergence tolerance applies to the gradient norm per observed stage
    (divided by ``N * K``).
    """
    x = _stack(samples, c)
    masks = _remaining_masks(x, c)
    gtol = cfg.tolerance * x.size

    def negobj(theta):
        ll, g = _pl_loglik_grad(theta, x, masks)
        return -(ll - cfg.eta * theta @ theta), -(g - 2 * cfg.eta * theta)

    trace = [-negobj(np.zeros(c))[0]]
    res = minimize(
        negobj, np.zeros(c), jac=True, method="L-BFGS-B",
        callback=lambda th: trace.append(-negobj(th)[0]),
        options={"maxiter": cfg.max_iterations, "gtol": gtol, "ftol": 1e-15},
    )
    theta = res.x - res.x.mean()
    grad_norm = np.linalg.norm(negobj(theta)[1])
    converged = bool(res.success or grad_norm < gtol)
    if not converged:
        logger.warning("Plackett-Luce fit stopped before convergence: %s", res.message)
    return PLFit(PlackettLuceModel(theta), float(-negobj(theta)[0]), int(res.nit),
                 converged, trace)


def pl_consensus(model: PlackettLuceModel) -> Ranking:
    return ranking_from_scores(model.log_weights)


# -- Mallows consensus and spread -----------------------------------------------

def precedence_counts(samples: Sequence[TopKList], c: int) -> np.ndarray:
    """``M[x, u]``: samples that place ``x`` in the top-K with ``u`` not yet placed.

    The top-K consensus objective of a mode is ``sum M[x, u]`` over pairs
    the mode orders as ``u`` before ``x``.
    """
    x = _stack(samples, c)
    masks = _remaining_masks(x, c)
    counts = np.zeros((c, c))
    n, k = x.shape
    for i in range(k):
        # items remaining strictly after stage i
        after = masks[:, i].copy()
        after[np.arange(n), x[:, i]] = False
        np.add.at(counts, x[:, i], after)
    return counts


def consensus_objective(samples: Sequence[TopKList], mode: Ranking) -> int:
    """``sum_n sum_{j<=K} V_j(sample_n, mode)``, the Kendall sum when K = C."""
    x = _stack(samples, mode.size)
    rank0 = mode.positions()
    return int(_objectives_for_modes(x, rank0[None, :], mode.size)[0])


def _objectives_for_modes(x: np.ndarray, rank0: np.ndarray, c: int) -> np.ndarray:
    """Objective for each row of ``rank0`` (mode positions), straight from V_j."""
    totals = np.zeros(rank0.shape[0], dtype=np.int64)
    for row in x:
        remaining = np.ones(c, dtype=bool)
        for item in row:
            remaining[item] = False
            ahead = rank0[:, remaining] < rank0[:, [item]]
            totals += ahead.sum(axis=1)
    return totals


@dataclass
class ConsensusFit:
    mode: Ranking
    objective: float
    iterations: int
    converged: bool


def mallows_consensus_fit(samples: Sequence[TopKList], c: int,
                          cfg: FitConfig = FitConfig()) -> ConsensusFit:
    """Adjacent-transposition descent on the consensus objective.

    Starts from the mean-position ranking; each step applies the adjacent
    swap with the largest decrease (leftmost on ties) until no swap helps.
    """
    counts = precedence_counts(samples, c)
    order = list(borda_mean_ranking(samples).order)
    objective = float(sum(counts[order[b], order[a]]
                          for a in range(c) for b in range(a + 1, c)))
    converged = False
    it = 0
    for it in range(1, cfg.consensus_max_iterations + 1):
        left = np.array(order[:-1])
        right = np.array(order[1:])
        deltas = counts[left, right] - counts[right, left]
        if deltas.size == 0 or deltas.min() >= 0:
            converged = True
            it -= 1
            break
        p = int(np.argmin(deltas))
        order[p], order[p + 1] = order[p + 1], order[p]
        objective += float(deltas[p])
    return ConsensusFit(Ranking(tuple(order)), objective, it, converged)


def mallows_consensus(samples: Sequence[TopKList], c: int,
                      cfg: FitConfig = FitConfig()) -> Ranking:
    return mallows_consensus_fit(samples, c, cfg).mode


def kemeny_exhaustive(samples: Sequence[TopKList], c: int) -> Ranking:
    """Global minimizer of the consensus objective by enumeration.

    Ties go to the lexicographically smallest order.
    """
    if c > ORACLE_MAX_C:
        raise CapacityError(f"exhaustive consensus limited to C <= {ORACLE_MAX_C}")
    x = _stack(samples, c)
    perms = np.array(list(itertools.permutations(range(c))), dtype=np.int64)
    rank0 = np.argsort(perms, axis=1)
    objectives = _objectives_for_modes(x, rank0, c)
    return Ranking(tuple(perms[int(np.argmin(objectives))]))


def mallows_fit_lambda(samples: Sequence[TopKList], mode: Ranking,
                       cfg: FitConfig = FitConfig()) -> float:
    """Maximum-likelihood spread for a fixed mode.

    The log-likelihood is concave in the spread, so its derivative
    ``E_lam[S] - mean(S)`` is decreasing and is solved by bracketing.
    """
    x = _stack(samples, mode.size)
    c, k = mode.size, x.shape[1]
    mean_s = consensus_objective(samples, mode) / x.shape[0]

    def score(lam):
        return -mean_s - mallows_dlog_phi(lam, c, k)

    if score(0.0) <= 0:
        return 0.0
    if score(cfg.lambda_max) >= 0:
        return float(cfg.lambda_max)
    return float(brentq(score, 0.0, cfg.lambda_max, xtol=cfg.tolerance))


# -- per-class priors ----------------------------------------------------------

@dataclass
class ClassPrior:
    consensus: Ranking
    model: PlackettLuceModel | MallowsModel
    k: int
    objective: float
    iterations: int
    converged: bool


@dataclass
class SemanticPrior:
    """Consensus ranking and fitted model for each test class (in order)."""

    classes: list[str]
    entries: dict[str, ClassPrior]
    model_kind: str

    def consensus(self, z: str) -> Ranking:
        return self.entries[z].consensus

    def consensus_list(self) -> list[Ranking]:
        return [self.entries[z].consensus for z in self.classes]


def fit_class_prior(lists: Sequence[TopKList], c: int, model_kind: ModelKind,
                    cfg: FitConfig = FitConfig()) -> ClassPrior:
    k = lists[0].k
    if model_kind == "pl":
        fit = pl_fit(lists, c, cfg)
        return ClassPrior(pl_consensus(fit.model), fit.model, k, fit.objective,
                          fit.iterations, fit.converged)
    if model_kind == "mallows":
        cons = mallows_consensus_fit(lists, c, cfg)
        lam = mallows_fit_lambda(lists, cons.mode, cfg)
        return ClassPrior(cons.mode, MallowsModel(cons.mode, lam, k), k, cons.objective,
                          cons.iterations, cons.converged)
    raise ValueError(f"unknown model kind {model_kind!r}")


def learn_priors(samples: Sequence[RankingSample], test_classes: Sequence[str],
                 model_kind: ModelKind = "mallows",
                 cfg: FitConfig = FitConfig()) -> SemanticPrior:
    """Fit one prior per test class from its ranking observations."""
    grouped: dict[str, list[TopKList]] = defaultdict(list)
    known = set(test_classes)
    for s in samples:
        if s.test_class not in known:
            raise ValueError(f"sample for undeclared test class {s.test_class!r}")
        grouped[s.test_class].append(s.ranking)
    missing = [z for z in test_classes if z not in grouped]
    if missing:
        raise ValueError(f"no ranking samples for test classes: {', '.join(missing)}")
    c = samples[0].ranking.universe_size
    entries = {z: fit_class_prior(grouped[z], c, model_kind, cfg) for z in test_classes}
    return SemanticPrior(list(test_classes), entries, model_kind)


def log_likelihood_under(prior: ClassPrior, t: TopKList) -> float:
    """Log-probability of a ranking under a fitted class prior."""
    if isinstance(prior.model, MallowsModel):
        return mallows_log_prob(prior.model, t)
    return pl_log_prob(prior.model, t)


__all__ = [
    "ClassPrior", "ConsensusFit", "FitConfig", "PLFit", "RankingSample", "SemanticPrior",
    "consensus_objective", "fit_class_prior", "kemeny_exhaustive", "learn_priors",
    "log_likelihood_under", "mallows_consensus", "mallows_consensus_fit",
    "mallows_fit_lambda", "pl_consensus", "pl_fit", "pl_log_likelihood",
    "precedence_counts",
]
