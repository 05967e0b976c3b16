"""Linear classifier suites (multiclass, one-vs-rest, one-vs-one) and Platt scaling."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Literal, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit, logsumexp, softmax

from .score_rankers import PairwiseScores, deterministic_rank_ovo

logger = logging.getLogger(__name__)

Mode = Literal["multiclass", "ovr", "ovo"]


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be an N x d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on N")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label index out of range")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class LinearSuite:
    """Linear score functions plus the standardization used at fit time.

    ``weights[r] . z + biases[r]`` is the r-th raw score on standardized
    input ``z``; rows are classes (multiclass, ovr) or the ``pairs`` (ovo).
    """

    mode: str
    class_names: list[str]
    weights: np.ndarray
    biases: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    pairs: list[tuple[int, int]] = field(default_factory=list)
    platt: np.ndarray | None = None  # (rows, 2) of (a, b)
    degenerate: list[int] = field(default_factory=list)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.mean.size:
            raise ValueError(f"expected {self.mean.size} features, got {x.shape[1]}")
        z = (x - self.mean) / self.scale
        return z @ self.weights.T + self.biases

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "class_names": list(self.class_names),
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "standardization": {"mean": self.mean.tolist(), "scale": self.scale.tolist()},
            "pairs": [list(p) for p in self.pairs],
            "platt": None if self.platt is None else self.platt.tolist(),
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "LinearSuite":
        return cls(
            mode=d["mode"],
            class_names=list(d["class_names"]),
            weights=np.array(d["weights"], dtype=float),
            biases=np.array(d["biases"], dtype=float),
            mean=np.array(d["standardization"]["mean"], dtype=float),
            scale=np.array(d["standardization"]["scale"], dtype=float),
            pairs=[tuple(p) for p in d.get("pairs", [])],
            platt=None if d.get("platt") is None else np.array(d["platt"], dtype=float),
            degenerate=list(d.get("degenerate", [])),
        )


def _standardize(x: np.ndarray):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    return (x - mean) / scale, mean, scale


# -- multinomial logistic regression ------------------------------------------

def multinomial_objective(params: np.ndarray, x: np.ndarray, y: np.ndarray, n_classes: int,
                          reg: float):
    """Mean cross-entropy plus ``reg * ||W||^2`` and its gradient.

    ``params`` packs ``W`` (C x d, row-major) followed by the C biases.
    """
    n, d = x.shape
    w = params[: n_classes * d].reshape(n_classes, d)
    b = params[n_classes * d:]
    logits = x @ w.T + b
    lse = logsumexp(logits, axis=1)
    value = np.mean(lse - logits[np.arange(n), y]) + reg * np.sum(w * w)
    p = np.exp(logits - lse[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n
    grad_w = p.T @ x + 2 * reg * w
    grad_b = p.sum(axis=0)
    return float(value), np.concatenate([grad_w.ravel(), grad_b])


def _minimize(fun, x0, tol, max_iter, trace=None):
    res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                   callback=None if trace is None else (lambda p: trace.append(fun(p)[0])),
                   options={"maxiter": max_iter, "gtol": tol})
    return res


def fit_multinomial_logistic(data: Dataset, reg: float = 1e-3, tol: float = 1e-8,
                             max_iter: int = 2000) -> LinearSuite:
    if data.n_classes < 2:
        raise ValueError("multinomial logistic regression needs at least 2 classes")
    if reg < 0:
        raise ValueError("reg must be >= 0")
    z, mean, scale = _standardize(data.features)
    c, d = data.n_classes, z.shape[1]
    res = _minimize(lambda p: multinomial_objective(p, z, data.labels, c, reg),
                    np.zeros(c * d + c), tol, max_iter)
    return LinearSuite("multiclass", list(data.class_names), res.x[: c * d].reshape(c, d),
                       res.x[c * d:].copy(), mean, scale)


# -- binary logistic models ------------------------------------------------------

def binary_objective(params: np.ndarray, x: np.ndarray, y: np.ndarray, reg: float):
    """Mean logistic loss for labels ``y`` in {-1, +1} plus ``reg * ||w||^2``."""
    w, b = params[:-1], params[-1]
    margin = y * (x @ w + b)
    value = -np.mean(log_expit(margin)) + reg * (w @ w)
    coef = -y * expit(-margin) / x.shape[0]
    grad = np.concatenate([x.T @ coef + 2 * reg * w, [coef.sum()]])
    return float(value), grad


def _fit_binary(x, y, reg, tol, max_iter):
    res = _minimize(lambda p: binary_objective(p, x, y, reg), np.zeros(x.shape[1] + 1),
                    tol, max_iter)
    return res.x[:-1], res.x[-1]


def platt_fit(raw_scores: Sequence[float], binary_labels: Sequence[int],
              max_iter: int = 100, min_step: float = 1e-10, sigma: float = 1e-12):
    """Fit ``P(y=1 | s) = 1 / (1 + exp(a s + b))`` by regularized likelihood.

    Newton iterations with backtracking on smoothed targets
    ``(N+ + 1)/(N+ + 2)`` and ``1/(N- + 2)``.
    """
    s = np.asarray(raw_scores, dtype=float)
    lab = np.asarray(binary_labels)
    pos = lab > 0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("Platt scaling needs both positive and negative examples")
    t = np.where(pos, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(a, b):
        f = a * s + b
        # -[t log p + (1-t) log(1-p)] with p = sigmoid(-f)
        return float(np.sum(t * f + np.logaddexp(0, -f)))

    a, b = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = nll(a, b)
    for _ in range(max_iter):
        f = a * s + b
        p = expit(-f)
        q = 1.0 - p
        d1 = t - p  # d nll / d f
        d2 = p * q
        h11 = sigma + np.sum(s * s * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(s * d2)
        g1, g2 = np.sum(s * d1), np.sum(d1)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            na, nb = a + step * da, b + step * db
            nf = nll(na, nb)
            if nf < fval + 1e-4 * step * gd:
                a, b, fval = na, nb, nf
                break
            step /= 2.0
        else:
            # no further decrease representable; already at the optimum
            logger.debug("Platt line search stalled at |g|=(%g, %g)", g1, g2)
            break
    return float(a), float(b)


def platt_probability(raw, a: float, b: float):
    return expit(-(a * np.asarray(raw, dtype=float) + b))


def fit_binary_suite(data: Dataset, mode: Literal["ovr", "ovo"], reg: float = 1e-3,
                     calibrate: bool = True, tol: float = 1e-8,
                     max_iter: int = 2000) -> LinearSuite:
    """One-vs-rest or one-vs-one binary logistic models, optionally Platt-scaled.

    For ovo the model for pair ``(i, j)``, ``i < j``, is positive on class ``i``.
    """
    if data.n_classes < 2:
        raise ValueError("need at least 2 classes")
    z, mean, scale = _standardize(data.features)
    c, d = data.n_classes, z.shape[1]
    y = data.labels
    if mode == "ovr":
        rows = [(i, None) for i in range(c)]
    elif mode == "ovo":
        rows = list(itertools.combinations(range(c), 2))
    else:
        raise ValueError(f"unknown binary mode {mode!r}")
    weights = np.zeros((len(rows), d))
    biases = np.zeros(len(rows))
    platt = np.zeros((len(rows), 2)) if calibrate else None
    degenerate = []
    for r, (i, j) in enumerate(rows):
        if j is None:
            xs, ys = z, np.where(y == i, 1.0, -1.0)
        else:
            sel = (y == i) | (y == j)
            xs, ys = z[sel], np.where(y[sel] == i, 1.0, -1.0)
        if not (np.any(ys > 0) and np.any(ys < 0)):
            degenerate.append(r)
            logger.warning("binary model %s has a single class; using the zero function",
                           (i, j) if j is not None else i)
            if platt is not None:
                platt[r] = (-1.0, 0.0)
            continue
        weights[r], biases[r] = _fit_binary(xs, ys, reg, tol, max_iter)
        if platt is not None:
            platt[r] = platt_fit(xs @ weights[r] + biases[r], ys)
    pairs = [] if mode == "ovr" else [tuple(p) for p in rows]
    return LinearSuite(mode, list(data.class_names), weights, biases, mean, scale,
                       pairs, platt, degenerate)


# -- prediction ----------------------------------------------------------------

def predict_score_matrix(suite: LinearSuite, x: np.ndarray) -> np.ndarray:
    """Scores for a batch: (N, C) for multiclass/ovr, (N, C, C) antisymmetric for ovo.

    Platt-calibrated suites report the calibrated log-odds ``-(a s + b)``.
    """
    raw = suite.raw_scores(x)
    if suite.platt is not None:
        raw = -(suite.platt[:, 0] * raw + suite.platt[:, 1])
    if suite.mode != "ovo":
        return raw
    c = suite.n_classes
    out = np.zeros((raw.shape[0], c, c))
    i, j = np.array(suite.pairs).T
    out[:, i, j] = raw
    out[:, j, i] = -raw
    return out


def predict_scores(suite: LinearSuite, x: np.ndarray):
    """Scores of one sample: a score vector, or :class:`PairwiseScores` for ovo."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("predict_scores takes a single feature vector")
    s = predict_score_matrix(suite, x[None, :])[0]
    return PairwiseScores(s) if suite.mode == "ovo" else s


def predict_proba(suite: LinearSuite, x: np.ndarray) -> np.ndarray:
    """Per-class probabilities ``P(y_k | x)`` (softmax, or per-class sigmoid for ovr)."""
    s = predict_score_matrix(suite, x)
    if suite.mode == "multiclass":
        return softmax(s, axis=1)
    if suite.mode == "ovr":
        return expit(s)
    raise ValueError("class probabilities are defined for multiclass and ovr suites only")


def predict_labels(suite: LinearSuite, x: np.ndarray) -> np.ndarray:
    s = predict_score_matrix(suite, x)
    if suite.mode == "ovo":
        return np.array([deterministic_rank_ovo(PairwiseScores(m)).order[0] for m in s])
    return np.argmax(s, axis=1)
