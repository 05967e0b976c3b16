"""Seeded synthetic "semantic worlds" standing in for real image/text benchmarks.

Every class gets a point in a low-dimensional semantic space.  Feature-space
class means are an isometric embedding of those points, so feature and
semantic similarity agree in rank; samples scatter around the means with
``noise_level`` standard deviation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .baseline_classifiers import Dataset
from .prior_learning import RankingSample
from .ranking_core import ranking_from_scores
from .ranking_models import MallowsModel, mallows_sample_many
from .zero_shot import SimilaritySource

#: Distance between feature-space class means per unit of semantic distance.
FEATURE_SCALE = 10.0


@dataclass
class SyntheticWorld:
    train_classes: list[str]
    test_classes: list[str]
    semantic: np.ndarray  # (n_train + n_test, semantic_dim); train rows first
    means: np.ndarray  # (n_train + n_test, feature_dim)
    noise_level: float
    seed: int

    @property
    def similarity(self) -> np.ndarray:
        """Ground-truth similarity (negative semantic distance), test x train."""
        n = len(self.train_classes)
        train, test = self.semantic[:n], self.semantic[n:]
        return -np.linalg.norm(test[:, None, :] - train[None, :, :], axis=2)

    def true_source(self) -> SimilaritySource:
        return SimilaritySource("ground_truth", self.similarity, self.test_classes,
                                self.train_classes)

    def to_dict(self) -> dict[str, Any]:
        return {"train_classes": self.train_classes, "test_classes": self.test_classes,
                "semantic": self.semantic.tolist(), "means": self.means.tolist(),
                "noise_level": self.noise_level, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SyntheticWorld":
        return cls(list(d["train_classes"]), list(d["test_classes"]),
                   np.array(d["semantic"], dtype=float), np.array(d["means"], dtype=float),
                   float(d["noise_level"]), int(d["seed"]))


def _names(prefix: str, n: int) -> list[str]:
    width = len(str(n - 1))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def synth_world(n_train_classes: int = 40, n_test_classes: int = 10, feature_dim: int = 50,
                samples_per_class: int = 50, noise_level: float = 1.0, seed: int = 0,
                semantic_dim: int = 2) -> tuple[SyntheticWorld, Dataset, Dataset]:
    """Generate a world plus train-domain and test-domain datasets."""
    if n_train_classes < 2 or n_test_classes < 2 or samples_per_class < 1:
        raise ValueError("need >= 2 train classes, >= 2 test classes, >= 1 sample per class")
    if feature_dim < semantic_dim:
        raise ValueError("feature_dim must be at least semantic_dim")
    if noise_level < 0:
        raise ValueError("noise_level must be >= 0")
    rng = np.random.default_rng(seed)
    n = n_train_classes + n_test_classes
    semantic = rng.random((n, semantic_dim))
    basis, _ = np.linalg.qr(rng.standard_normal((feature_dim, semantic_dim)))
    means = FEATURE_SCALE * semantic @ basis.T
    world = SyntheticWorld(_names("train_", n_train_classes), _names("test_", n_test_classes),
                           semantic, means, float(noise_level), int(seed))

    def sample(rows, names):
        labels = np.repeat(np.arange(len(rows)), samples_per_class)
        x = means[rows][labels] + noise_level * rng.standard_normal((labels.size, feature_dim))
        return Dataset(x, labels, names)

    train = sample(np.arange(n_train_classes), world.train_classes)
    test = sample(np.arange(n_train_classes, n), world.test_classes)
    return world, train, test


def synth_similarity_sources(world: SyntheticWorld, n_sources: int = 5,
                             distortion: float = 0.05, seed: int = 0) -> list[SimilaritySource]:
    """Heterogeneous sources: random increasing transforms of the true similarity.

    Each source raises the [0, 1]-normalized truth to a random positive power,
    adds Gaussian noise of scale ``distortion`` and maps the result onto a
    random offset and range.
    """
    if n_sources < 1:
        raise ValueError("need at least one source")
    rng = np.random.default_rng(seed)
    sim = world.similarity
    u = (sim - sim.min()) / (sim.max() - sim.min())
    out = []
    for s in range(n_sources):
        power = np.exp(rng.uniform(-1.5, 1.5))
        scale = np.exp(rng.uniform(np.log(0.1), np.log(100.0)))
        offset = rng.uniform(-50.0, 50.0)
        v = u**power + distortion * rng.standard_normal(u.shape)
        out.append(SimilaritySource(f"source_{s}", offset + scale * v, world.test_classes,
                                    world.train_classes))
    return out


def synth_crowd(world: SyntheticWorld, surveys_per_class: int = 50, lam: float = 2.0,
                k: int = 10, seed: int = 0) -> list[RankingSample]:
    """Simulated surveys: Mallows draws around each test class's true ranking, cut to top-K."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    rng = np.random.default_rng(seed)
    out = []
    for z, row in zip(world.test_classes, world.similarity):
        mode = ranking_from_scores(row)
        for r in mallows_sample_many(MallowsModel(mode, lam, mode.size), surveys_per_class, rng):
            out.append(RankingSample(z, r.top(k), "crowd"))
    return out
