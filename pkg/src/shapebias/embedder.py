"""Toy convolutional classifier whose penultimate activations serve as h(x).

conv3x3(16) -> ReLU -> maxpool -> conv3x3(32) -> ReLU -> maxpool ->
dense(feature_dim) -> ReLU -> dense(n_classes).  Features are the ReLU output
feeding the final (softmax) layer.
"""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeding
from .diffcore import Tensor, forward_backward, make_optimizer
from .diffcore import checkpoint as codec
from .diffcore import functional as F
from .diffcore.init import glorot_uniform
from .errors import ContractError, NumericError, TrainingError

log = logging.getLogger(__name__)

PARAM_ORDER = ("conv1.w", "conv1.b", "conv2.w", "conv2.b", "fc.w", "fc.b", "out.w", "out.b")
_EVAL_BATCH = 250


@dataclass
class EmbedderConfig:
    feature_dim: int = 64
    channels: tuple = (16, 32)
    steps: int = 1000
    batch_size: int = 32
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    decay: float = 0.9
    eps: float = 1e-8
    checkpoint_interval: int = 100
    seed: int = 0
    image_size: int = 32

    def __post_init__(self):
        self.channels = tuple(self.channels)
        if self.feature_dim <= 0 or self.steps < 0 or self.batch_size <= 0 or self.checkpoint_interval <= 0:
            raise ContractError("embedder sizes and intervals must be positive")
        if self.image_size % 4:
            raise ContractError("image_size must be divisible by 4 (two 2x2 poolings)")


@dataclass
class EmbedderCheckpoint:
    step: int
    params: dict = field(repr=False)
    train_accuracy: float
    train_loss: float
    classes: tuple
    image_size: int

    @property
    def feature_dim(self):
        return self.params["fc.w"].shape[1]

    def save(self, path):
        meta = {"step": self.step, "train_accuracy": self.train_accuracy, "train_loss": self.train_loss,
                "classes": list(self.classes), "image_size": self.image_size}
        codec.save(path, self.params, json.dumps(meta, sort_keys=True))

    @classmethod
    def load(cls, path):
        params, meta = codec.load(path)
        if meta is None or set(params) != set(PARAM_ORDER):
            raise ContractError(f"{path} is not an embedder checkpoint")
        m = json.loads(meta)
        return cls(m["step"], params, m["train_accuracy"], m["train_loss"], tuple(m["classes"]), m["image_size"])


def init_params(config, n_classes, rng):
    c1, c2 = config.channels
    flat = c2 * (config.image_size // 4) ** 2
    return {
        "conv1.w": glorot_uniform(rng, 3 * 9, c1 * 9, (c1, 3, 3, 3)),
        "conv1.b": np.zeros(c1),
        "conv2.w": glorot_uniform(rng, c1 * 9, c2 * 9, (c2, c1, 3, 3)),
        "conv2.b": np.zeros(c2),
        "fc.w": glorot_uniform(rng, flat, config.feature_dim),
        "fc.b": np.zeros(config.feature_dim),
        "out.w": glorot_uniform(rng, config.feature_dim, n_classes),
        "out.b": np.zeros(n_classes),
    }


def preprocess(images):
    """(N, H, W, 3) uint8 -> (N, 3, H, W) float64 in [0, 1]."""
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    return np.ascontiguousarray(images.transpose(0, 3, 1, 2), dtype=np.float64) / 255.0


def forward(params, x):
    """Return (features, logits) tensors for a preprocessed batch."""
    h = F.maxpool2d(F.relu(F.conv2d(x, params["conv1.w"], params["conv1.b"])))
    h = F.maxpool2d(F.relu(F.conv2d(h, params["conv2.w"], params["conv2.b"])))
    h = h.reshape(h.shape[0], -1)
    feats = F.relu(F.dense(h, params["fc.w"], params["fc.b"]))
    return feats, F.dense(feats, params["out.w"], params["out.b"])


def _frozen(params):
    return {k: Tensor(v) for k, v in params.items()}


def _check_images(ckpt, images):
    images = np.asarray(images)
    shape = images.shape[-3:]
    if shape != (ckpt.image_size, ckpt.image_size, 3):
        raise ContractError(f"image shape {shape} does not match embedder input {(ckpt.image_size,) * 2 + (3,)}")


def features_and_logits(ckpt, images):
    """Batched inference; returns numpy (features, logits)."""
    _check_images(ckpt, images)
    params = _frozen(ckpt.params)
    images = np.asarray(images)
    if images.ndim == 3:
        images = images[None]
    feats, logits = [], []
    for start in range(0, len(images), _EVAL_BATCH):
        f, z = forward(params, Tensor(preprocess(images[start:start + _EVAL_BATCH])))
        feats.append(f.data)
        logits.append(z.data)
    if not feats:
        return np.zeros((0, ckpt.feature_dim)), np.zeros((0, len(ckpt.classes)))
    return np.concatenate(feats), np.concatenate(logits)


def embed_batch(ckpt, images):
    return features_and_logits(ckpt, images)[0]


def embed(ckpt, image):
    """Feature vector h(x) of one (H, W, 3) image."""
    if np.asarray(image).ndim != 3:
        raise ContractError("embed takes a single (H, W, 3) image")
    return embed_batch(ckpt, image)[0]


def _label_index(ckpt, labels):
    lookup = {c: k for k, c in enumerate(ckpt.classes)}
    try:
        return np.array([lookup[int(y)] for y in labels], dtype=np.intp)
    except KeyError as exc:
        raise ContractError(f"label {exc.args[0]} is not in the embedder's label space") from None


def evaluate(ckpt, dataset):
    """(top-1 accuracy, mean cross-entropy) of the classifier on ``dataset``."""
    if len(dataset) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    target = _label_index(ckpt, dataset.labels)
    _, logits = features_and_logits(ckpt, dataset.images)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    acc = float((np.argmax(logits, axis=1) == target).mean())
    return acc, float(-logp[np.arange(len(target)), target].mean())


def classify_accuracy(ckpt, dataset):
    return evaluate(ckpt, dataset)[0]


def train_embedder(dataset, config=None, on_checkpoint=None):
    """Supervised softmax training; checkpoints at step 0 and every interval.

    ``on_checkpoint(ckpt)`` is called as each checkpoint is taken.
    """
    config = config or EmbedderConfig()
    if len(dataset) == 0:
        raise ContractError("training dataset is empty")
    if dataset.n_classes < 2:
        raise ContractError("need at least two classes")
    classes = tuple(dataset.classes)
    rng = seeding.generator(config.seed, "embedder-init")
    params = {k: Tensor(v, requires_grad=True) for k, v in init_params(config, len(classes), rng).items()}
    plist = [params[k] for k in PARAM_ORDER]
    opt_kwargs = {"lr": config.lr}
    if config.optimizer == "rmsprop":
        opt_kwargs.update(decay=config.decay, eps=config.eps)
    opt = make_optimizer(config.optimizer, **opt_kwargs)
    x_all = dataset.images
    lookup = {c: k for k, c in enumerate(classes)}
    y_all = np.array([lookup[int(y)] for y in dataset.labels], dtype=np.intp)
    order_rng = seeding.generator(config.seed, "embedder-shuffle")
    order, cursor = order_rng.permutation(len(y_all)), 0

    checkpoints = []

    def snapshot(step):
        ck = EmbedderCheckpoint(step, {k: params[k].data.copy() for k in PARAM_ORDER}, 0.0, 0.0, classes,
                                config.image_size)
        ck.train_accuracy, ck.train_loss = evaluate(ck, dataset)
        log.info("embedder seed=%d step=%d loss=%.4f acc=%.4f", config.seed, step, ck.train_loss,
                 ck.train_accuracy)
        checkpoints.append(ck)
        if on_checkpoint is not None:
            on_checkpoint(ck)

    snapshot(0)
    for step in range(1, config.steps + 1):
        if cursor + config.batch_size > len(order):
            order, cursor = order_rng.permutation(len(y_all)), 0
        idx = order[cursor:cursor + config.batch_size]
        cursor += config.batch_size
        try:
            _, logits = forward(params, Tensor(preprocess(x_all[idx])))
            loss = F.cross_entropy(logits, y_all[idx])
            grads = forward_backward(loss, plist)
        except NumericError as exc:
            raise TrainingError(f"embedder diverged at step {step}: {exc}", step=step) from exc
        opt.step(plist, [grads[p] for p in plist])
        if step % config.checkpoint_interval == 0 or step == config.steps:
            snapshot(step)
    return checkpoints


def config_dict(config):
    d = asdict(config)
    d["channels"] = list(config.channels)
    return d
