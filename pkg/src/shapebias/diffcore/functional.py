"""Differentiable operations on :class:`Tensor`.

Elementwise ops broadcast like numpy; gradients are summed back to the input
shape.  Layers (dense, conv, pooling, softmax, cross-entropy) live here too.
"""

import numpy as np

from ..errors import ContractError, NumericError
from . import kernels
from .tensor import Tensor, as_tensor, make


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make(a.data + b.data, (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make(a.data - b.data, (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return make(a.data * b.data, (a, b),
                lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return make(out, (a, b),
                lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)), "div")


def neg(a):
    return make(-a.data, (a,), lambda g: (-g,), "neg")


def matmul(a, b):
    """``a @ b`` with ``a`` of rank 1 or 2 and ``b`` of rank 2."""
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2 or a.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ContractError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        ga = g @ b.data.T
        gb = np.outer(a.data, g) if a.ndim == 1 else a.data.T @ g
        return ga, gb

    return make(a.data @ b.data, (a, b), backward, "matmul")


def sum(a, axis=None, keepdims=False):  # noqa: A001
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    n = a.size if axis is None else a.shape[axis]
    return sum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(a, shape):
    return make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a):
    return make(a.data.T.copy(), (a,), lambda g: (g.T,), "transpose")


def index(a, idx):
    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return make(np.array(a.data[idx]), (a,), backward, "index")


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return make(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                lambda g: tuple(np.split(g, sizes, axis=axis)), "concat")


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return make(np.stack([t.data for t in tensors], axis=axis), tensors, backward, "stack")


def exp(a):
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    if (a.data <= 0).any():
        raise NumericError("log of non-positive value")
    return make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def sqrt(a):
    out = np.sqrt(a.data)
    return make(out, (a,), lambda g: (0.5 * g / out,), "sqrt")


def tanh(a):
    out = np.tanh(a.data)
    return make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a):
    out = 0.5 * (np.tanh(0.5 * a.data) + 1.0)
    return make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a):
    mask = a.data > 0
    return make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make(out, (a,), backward, "softmax")


def log_softmax(a, axis=-1):
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return make(out, (a,), backward, "log_softmax")


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim == 1:
        logits = reshape(logits, (1, -1))
        labels = labels.reshape(1)
    n, k = logits.shape
    if labels.shape != (n,) or (labels < 0).any() or (labels >= k).any():
        raise ContractError("labels must be one class index per row")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()

    def backward(g):
        d = np.exp(logp)
        d[np.arange(n), labels] -= 1.0
        return (g * d / n,)

    return make(np.asarray(loss), (logits,), backward, "cross_entropy")


def dense(x, weight, bias=None):
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def conv2d(x, weight, bias):
    """3x3 convolution, stride 1, zero padding 1.

    x: (N, C, H, W); weight: (F, C, 3, 3); bias: (F,).  Returns (N, F, H, W).
    """
    n, c, h, w = x.shape
    f = weight.shape[0]
    if weight.shape != (f, c, 3, 3) or bias.shape != (f,):
        raise ContractError(f"conv2d weight {weight.shape} / bias {bias.shape} do not fit input {x.shape}")
    cols = kernels.im2col3x3(np.ascontiguousarray(x.data))
    wmat = weight.data.reshape(f, c * 9)
    out = (cols @ wmat.T + bias.data).reshape(n, h, w, f).transpose(0, 3, 1, 2)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(n * h * w, f)
        gw = (gmat.T @ cols).reshape(weight.shape)
        gb = gmat.sum(axis=0)
        gx = kernels.col2im3x3(np.ascontiguousarray(gmat @ wmat), n, c, h, w) if x.requires_grad else None
        return gx, gw, gb

    return make(np.ascontiguousarray(out), (x, weight, bias), backward, "conv2d")


def maxpool2d(x):
    """2x2 max-pooling with stride 2; ties go to the first element in row-major order."""
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ContractError(f"maxpool2d needs (N, C, even H, even W), got {x.shape}")
    out, idx = kernels.maxpool2x2(np.ascontiguousarray(x.data))
    return make(out, (x,), lambda g: (kernels.maxpool2x2_backward(np.ascontiguousarray(g), idx),), "maxpool2d")


def l2_norm(a, axis=-1, keepdims=False):
    sq = sum(a * a, axis=axis, keepdims=keepdims)
    if (sq.data <= 0).any():
        raise NumericError("zero-norm vector")
    return sqrt(sq)


def cosine_similarity(u, v):
    """Cosine of the angle between two vectors; zero-norm input raises NumericError."""
    u, v = as_tensor(u), as_tensor(v)
    if u.ndim != 1 or u.shape != v.shape:
        raise ContractError(f"cosine_similarity needs equal-length vectors, got {u.shape}, {v.shape}")
    return sum(u * v) / (l2_norm(u) * l2_norm(v))


def cosine_matrix(a, b):
    """Pairwise cosine similarities between rows of ``a`` (m, d) and rows of ``b`` (k, d)."""
    a, b = as_tensor(a), as_tensor(b)
    an = a / l2_norm(a, axis=1, keepdims=True)
    bn = b / l2_norm(b, axis=1, keepdims=True)
    return matmul(an, transpose(bn))


__all__ = [
    "Tensor", "add", "sub", "mul", "div", "neg", "matmul", "sum", "mean", "reshape", "transpose",
    "index", "concat", "stack", "exp", "log", "sqrt", "tanh", "sigmoid", "relu", "softmax",
    "log_softmax", "cross_entropy", "dense", "conv2d", "maxpool2d", "l2_norm", "cosine_similarity",
    "cosine_matrix",
]
