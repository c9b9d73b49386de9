"""SGD and RMSProp updates applied in place to parameter tensors."""

import numpy as np

from ..errors import ContractError


class SGD:
    kind = "sgd"

    def __init__(self, lr=0.1):
        if lr <= 0:
            raise ContractError("learning rate must be positive")
        self.lr = lr

    def step(self, params, grads):
        _check_aligned(params, grads)
        for p, g in zip(params, grads):
            p.data -= self.lr * g


class RMSProp:
    """a <- decay*a + (1-decay)*g^2;  w <- w - lr*g/sqrt(a + eps)."""

    kind = "rmsprop"

    def __init__(self, lr=1e-3, decay=0.9, eps=1e-8):
        if lr <= 0:
            raise ContractError("learning rate must be positive")
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.accumulators = {}

    def step(self, params, grads):
        _check_aligned(params, grads)
        for p, g in zip(params, grads):
            a = self.accumulators.get(id(p))
            if a is None:
                a = np.zeros_like(p.data)
            a = self.decay * a + (1.0 - self.decay) * g * g
            self.accumulators[id(p)] = a
            p.data -= self.lr * g / np.sqrt(a + self.eps)


def make_optimizer(kind, **kwargs):
    kinds = {"sgd": SGD, "rmsprop": RMSProp}
    if kind not in kinds:
        raise ContractError(f"unknown optimizer {kind!r}")
    return kinds[kind](**kwargs)


def _check_aligned(params, grads):
    if len(params) != len(grads):
        raise ContractError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.data.shape != np.shape(g):
            raise ContractError(f"gradient shape {np.shape(g)} does not match parameter {p.data.shape}")
