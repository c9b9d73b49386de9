"""One-shot labeling: argmax rule, nearest-neighbour baseline, distances.

Ties are broken toward the lowest index everywhere.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError


class Distance(enum.Enum):
    EUCLIDEAN = "euclidean"
    COSINE_DISTANCE = "cosine"


@dataclass(eq=False)
class SupportSet:
    """k labeled items; ``xs`` holds embeddings (k, d) or images (k, H, W, 3)."""

    xs: np.ndarray
    labels: np.ndarray  # integer label per item
    n_labels: int = 0

    def __post_init__(self):
        self.xs = np.asarray(self.xs)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if len(self.xs) < 1:
            raise ContractError("support set must be non-empty")
        if len(self.xs) != len(self.labels):
            raise ContractError("support items and labels differ in length")
        if (self.labels < 0).any():
            raise ContractError("labels must be non-negative")
        self.n_labels = max(self.n_labels, int(self.labels.max()) + 1)

    def __len__(self):
        return len(self.labels)

    @property
    def k(self):
        return len(self.labels)

    @property
    def one_hot(self):
        out = np.zeros((self.k, self.n_labels))
        out[np.arange(self.k), self.labels] = 1.0
        return out

    @classmethod
    def from_pairs(cls, pairs):
        xs, ys = zip(*pairs)
        return cls(np.stack([np.asarray(x) for x in xs]), np.array(ys))


def _as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(len(x), -1)


def unit_rows(x):
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True))
    if (norms == 0).any():
        raise NumericError("zero-norm vector under cosine distance")
    return x / norms


def distances(probe, items, kind=Distance.EUCLIDEAN):
    """Distances from one probe vector to each row of ``items``."""
    kind = Distance(kind)
    items = _as_matrix(items)
    probe = np.asarray(probe, dtype=np.float64).reshape(1, -1)
    if probe.shape[1] != items.shape[1]:
        raise ContractError(f"probe length {probe.shape[1]} != support embedding length {items.shape[1]}")
    if kind is Distance.EUCLIDEAN:
        diff = items - probe
        return np.sqrt((diff * diff).sum(axis=1))
    return 1.0 - (unit_rows(probe) @ unit_rows(items).T)[0]


def nn_classify(probe, support, d=Distance.EUCLIDEAN):
    """Label of the nearest support embedding and its index (lowest index on ties)."""
    dist = distances(probe, support.xs, d)
    i = int(np.argmin(dist))
    return int(support.labels[i]), i


def one_shot_label(probs, atol=1e-9):
    """argmax of a predictive distribution, lowest label on ties."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ContractError("expected a 1-D distribution")
    if (probs < 0).any() or abs(probs.sum() - 1.0) > atol:
        raise ContractError(f"distribution is not normalized (sum={probs.sum()!r})")
    return int(np.argmax(probs))


class NearestNeighbor:
    """Nearest-neighbour one-shot classifier over ``embed_fn`` features.

    ``embed_fn`` maps a batch of raw inputs to (n, d) embeddings; the default
    treats inputs as embeddings already.
    """

    def __init__(self, embed_fn=None, distance=Distance.EUCLIDEAN):
        self.embed_fn = embed_fn if embed_fn is not None else (lambda xs: _as_matrix(xs))
        self.distance = Distance(distance)

    def label_scores(self, support, probe):
        """Per-label score (higher is better): minus the closest distance within the label."""
        feats = self.embed_fn(np.concatenate([np.asarray(support.xs), np.asarray(probe)[None]]))
        dist = distances(feats[-1], feats[:-1], self.distance)
        scores = np.full(support.n_labels, -np.inf)
        for y, dv in zip(support.labels, dist):
            scores[y] = max(scores[y], -dv)
        return scores

    def predict(self, support, probe):
        feats = self.embed_fn(np.concatenate([np.asarray(support.xs), np.asarray(probe)[None]]))
        label, _ = nn_classify(feats[-1], SupportSet(feats[:-1], support.labels, support.n_labels), self.distance)
        return label


def episode_accuracy(classifier, episodes):
    """Fraction of probes labeled correctly; ``classifier(support, probe) -> label``.

    Each episode is a (support, probes) pair where probes is a list of
    (x, label); every support must hold exactly one item per label.
    """
    episodes = list(episodes)
    if not episodes:
        raise ContractError("no episodes to evaluate")
    correct = total = 0
    for support, probes in episodes:
        if len(set(support.labels.tolist())) != support.k:
            raise ContractError("one-shot support set repeats a class")
        for x, y in probes:
            correct += int(classifier(support, x) == y)
            total += 1
    if total == 0:
        raise ContractError("episodes contain no probes")
    return correct / total
