"""Matching Networks over frozen embedder features.

g(x_i, S) = h_fwd_i + h_bwd_i + g'(x_i), a bidirectional LSTM over the support
sequence with a skip connection.  f(x, S) unrolls K steps of an LSTM fed
f'(x) whose recurrent input is the previous hidden state concatenated with an
attention readout over g(S); the output adds f'(x) back.  Attention is a
softmax over cosine similarities, and P(y | x, S) pools attention by label.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .diffcore import LstmParams, SGD, Tensor, forward_backward, lstm_step
from .diffcore import checkpoint as codec
from .diffcore import functional as F
from .errors import ContractError, NumericError, TrainingError

log = logging.getLogger(__name__)

LOG_CLAMP = 1e-12
_LSTM_NAMES = ("g_fwd", "g_bwd", "f")


@dataclass(eq=False)
class MatchNetModel:
    g_fwd: LstmParams
    g_bwd: LstmParams
    f: LstmParams
    read_steps: int = 2
    seed: int = 0
    embedder_path: str = ""
    clamp_count: int = field(default=0)

    def __post_init__(self):
        d = self.feature_dim
        for p in (self.g_fwd, self.g_bwd):
            if p.w_x.shape[0] != d or p.w_h.shape[0] != d:
                raise ContractError("support LSTMs must map feature_dim -> feature_dim")
        if self.f.hidden_size != d or self.f.w_x.shape[0] != d or self.f.w_h.shape[0] != 2 * d:
            raise ContractError("probe LSTM must take feature_dim input and 2*feature_dim recurrent input")
        if self.read_steps < 0:
            raise ContractError("read_steps must be >= 0")

    @property
    def feature_dim(self):
        return self.g_fwd.hidden_size

    def parameters(self):
        return self.g_fwd.parameters() + self.g_bwd.parameters() + self.f.parameters()

    def named_parameters(self):
        out = {}
        for name in _LSTM_NAMES:
            p = getattr(self, name)
            out.update({f"{name}.w_x": p.w_x, f"{name}.w_h": p.w_h, f"{name}.b": p.b})
        return out

    @classmethod
    def init(cls, feature_dim, seed=0, read_steps=2, embedder_path=""):
        rng = seeding.generator(seed, "matchnet-init")
        d = feature_dim
        return cls(LstmParams.init(d, d, rng), LstmParams.init(d, d, rng), LstmParams.init(d, d, rng, state_dim=2 * d),
                   read_steps, seed, embedder_path)

    @classmethod
    def zeros(cls, feature_dim, read_steps=2, embedder_path=""):
        d = feature_dim
        return cls(LstmParams.zeros(d, d), LstmParams.zeros(d, d), LstmParams.zeros(d, d, state_dim=2 * d),
                   read_steps, 0, embedder_path)

    def save(self, path):
        arrays = {k: v.data for k, v in self.named_parameters().items()}
        meta = {"embedder": self.embedder_path, "read_steps": self.read_steps, "seed": self.seed}
        codec.save(path, arrays, json.dumps(meta, sort_keys=True))

    @classmethod
    def load(cls, path):
        arrays, meta = codec.load(path)
        m = json.loads(meta or "{}")
        try:
            lstms = [LstmParams(*(Tensor(arrays[f"{n}.{k}"], requires_grad=True) for k in ("w_x", "w_h", "b")))
                     for n in _LSTM_NAMES]
        except KeyError as exc:
            raise ContractError(f"{path} is not a matching-network checkpoint (missing {exc})") from None
        return cls(*lstms, m.get("read_steps", 2), m.get("seed", 0), m.get("embedder", ""))


def _features(x, d):
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != d:
        raise ContractError(f"feature length {x.shape[1]} != model feature_dim {d}")
    return x


def embed_support(model, support_features):
    """Context embeddings g(x_i, S) for a (k, d) sequence of base features."""
    g_base = _features(support_features, model.feature_dim)
    k, d = g_base.shape
    if k == 0:
        raise ContractError("support set is empty")
    rows = [g_base[i] for i in range(k)]
    zero = Tensor(np.zeros(d))
    fwd, h, c = [], zero, zero
    for x in rows:
        h, c = lstm_step(model.g_fwd, h, c, x)
        fwd.append(h)
    bwd, h, c = [None] * k, zero, zero
    for i in reversed(range(k)):
        h, c = lstm_step(model.g_bwd, h, c, rows[i])
        bwd[i] = h
    return F.stack(fwd) + F.stack(bwd) + g_base


def attention(f_vecs, g_vecs):
    """Softmax over cosine similarity: (B, k) weights, rows sum to 1."""
    f_vecs = f_vecs if isinstance(f_vecs, Tensor) else Tensor(f_vecs)
    if f_vecs.ndim == 1:
        f_vecs = f_vecs.reshape(1, -1)
    return F.softmax(F.cosine_matrix(f_vecs, g_vecs), axis=1)


def embed_probe(model, probe_features, g):
    """f(x, S) for a (B, d) batch of base features given embedded support ``g``."""
    f_base = _features(probe_features, model.feature_dim)
    b, d = f_base.shape
    h = f_base
    state = Tensor(np.zeros((b, d)))
    c = Tensor(np.zeros((b, d)))
    readout = Tensor(np.zeros((b, d)))
    for step in range(model.read_steps):
        hh, c = lstm_step(model.f, F.concat([state, readout], axis=1), c, f_base)
        h = hh + f_base
        state = h
        if step + 1 < model.read_steps:
            readout = F.matmul(attention(h, g), g)
    return h


def mn_predict(model, probe_features, support_features, support_labels, n_labels=None):
    """P(y | x, S) as a (B, n_labels) tensor."""
    labels = np.asarray(support_labels, dtype=np.intp)
    n_labels = int(labels.max()) + 1 if n_labels is None else n_labels
    g = embed_support(model, support_features)
    f = embed_probe(model, probe_features, g)
    onehot = np.zeros((len(labels), n_labels))
    onehot[np.arange(len(labels)), labels] = 1.0
    return F.matmul(attention(f, g), Tensor(onehot))


@dataclass(frozen=True)
class Episode:
    """Dataset indices for support and probes, plus the class -> label permutation."""

    classes: tuple
    support_idx: tuple  # ordered by permuted label index
    probe_idx: tuple
    probe_classes: tuple
    perm: tuple  # perm[j] = label index of classes[j]

    def label_of(self, cls):
        return self.perm[self.classes.index(cls)]

    @property
    def support_labels(self):
        return tuple(sorted(self.perm))

    @property
    def probe_labels(self):
        return tuple(self.label_of(c) for c in self.probe_classes)


def sample_episode(dataset, way, rng):
    """``way`` classes, one support and one disjoint probe image per class, random labeling."""
    if way < 1 or dataset.n_classes < way:
        raise ContractError(f"dataset has {dataset.n_classes} classes, need {way}")
    chosen = tuple(int(c) for c in rng.choice(np.array(dataset.classes), size=way, replace=False))
    perm = tuple(int(p) for p in rng.permutation(way))
    picks = {}
    for cls in chosen:
        members = np.flatnonzero(dataset.labels == cls)
        if len(members) < 2:
            raise ContractError(f"class {cls} has fewer than 2 images")
        a, b = rng.choice(members, size=2, replace=False)
        picks[cls] = (int(a), int(b))
    by_label = sorted(range(way), key=lambda j: perm[j])
    support_idx = tuple(picks[chosen[j]][0] for j in by_label)
    probe_idx = tuple(picks[c][1] for c in chosen)
    return Episode(chosen, support_idx, probe_idx, chosen, perm)


def episode_loss(model, episode, features):
    """-sum over probes of log P(permuted true label); ``features`` indexes the dataset."""
    s_feats = features[list(episode.support_idx)]
    p_feats = features[list(episode.probe_idx)]
    way = len(episode.classes)
    probs = mn_predict(model, p_feats, s_feats, episode.support_labels, way)
    target = np.array(episode.probe_labels)
    picked = probs[np.arange(len(target)), target]
    low = picked.data < LOG_CLAMP
    if low.any():
        model.clamp_count += int(low.sum())
        picked = F.mul(picked, Tensor((~low).astype(np.float64))) + Tensor(low * LOG_CLAMP)
    return -F.sum(F.log(picked))


def train_episode(model, episode, optimizer, features):
    """One SGD step on the matching-network parameters; returns the episode loss."""
    params = model.parameters()
    try:
        loss = episode_loss(model, episode, features)
        grads = forward_backward(loss, params)
    except NumericError as exc:
        raise TrainingError(f"matching network diverged: {exc}") from exc
    optimizer.step(params, [grads[p] for p in params])
    return loss.item()


def predict_labels(model, episode, features):
    """Argmax labels (lowest on ties) for every probe of an episode."""
    way = len(episode.classes)
    probs = mn_predict(model, features[list(episode.probe_idx)], features[list(episode.support_idx)],
                       episode.support_labels, way).data
    return [int(np.argmax(row)) for row in probs]


def nn_predict_labels(episode, features, distance="euclidean"):
    from .oneshot import SupportSet, nn_classify

    support = SupportSet(features[list(episode.support_idx)], np.array(episode.support_labels))
    return [nn_classify(features[i], support, distance)[0] for i in episode.probe_idx]


def one_shot_accuracy(predict, dataset, way, n_episodes, rng, features):
    """Accuracy of ``predict(episode, features) -> labels`` over freshly sampled episodes."""
    correct = total = 0
    for _ in range(n_episodes):
        ep = sample_episode(dataset, way, rng)
        for got, want in zip(predict(ep, features), ep.probe_labels):
            correct += int(got == want)
            total += 1
    return correct / total


@dataclass
class MatchNetConfig:
    way: int = 2
    episodes: int = 1000
    lr: float = 0.1
    read_steps: int = 2
    checkpoint_interval: int = 100
    eval_episodes: int = 200
    n_train_classes: int = 8

    def __post_init__(self):
        if self.way < 2 or self.episodes < 0 or self.lr <= 0 or self.checkpoint_interval <= 0:
            raise ContractError("invalid matching-network config")


def train_matchnet(model, train_set, features, config, seed, on_checkpoint=None):
    """Episodic SGD on ``train_set`` (features row-aligned with it).

    ``on_checkpoint(step, model, losses)`` runs at step 0 and every interval,
    with the per-episode losses so far.  Returns all per-episode losses.
    """
    rng = seeding.generator(seed, "matchnet-episodes")
    opt = SGD(config.lr)
    losses = []
    if on_checkpoint is not None:
        on_checkpoint(0, model, losses)
    for step in range(1, config.episodes + 1):
        ep = sample_episode(train_set, config.way, rng)
        losses.append(train_episode(model, ep, opt, features))
        if on_checkpoint is not None and (step % config.checkpoint_interval == 0 or step == config.episodes):
            on_checkpoint(step, model, losses)
    if model.clamp_count:
        log.warning("matching network seed=%d: %d probabilities clamped at %g", seed, model.clamp_count, LOG_CLAMP)
    return losses
