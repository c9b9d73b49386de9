"""Central finite-difference gradient checking."""

import numpy as np

from .tensor import forward_backward


def numerical_grad(fn, param, eps=1e-5):
    """Central differences of scalar ``fn()`` with respect to ``param.data``."""
    grad = np.zeros_like(param.data)
    flat, gflat = param.data.reshape(-1), grad.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + eps
        up = fn().item()
        flat[k] = old - eps
        down = fn().item()
        flat[k] = old
        gflat[k] = (up - down) / (2 * eps)
    return grad


def relative_error(analytic, numeric):
    """||a - n|| / max(||a||, ||n||), with a floor so all-zero gradients compare as equal."""
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-10)
    return num / den


def check_gradients(fn, params, eps=1e-5):
    """Return the worst relative error over ``params`` for scalar-valued ``fn``."""
    grads = forward_backward(fn(), params)
    worst = 0.0
    for p in params:
        worst = max(worst, relative_error(grads[p], numerical_grad(fn, p, eps)))
    return worst
