"""Finite-difference checks for every differentiable primitive."""

import numpy as np
import pytest

from shapebias.diffcore import LstmParams, Tensor, lstm_step
from shapebias.diffcore import functional as F
from shapebias.diffcore.gradcheck import check_gradients

TOL = 1e-4


def _t(rng, *shape, positive=False):
    x = rng.normal(size=shape)
    if positive:
        x = np.abs(x) + 0.5
    return Tensor(x, requires_grad=True)


CASES = {
    "add_broadcast": lambda r: (lambda a, b: F.sum(F.tanh(a + b)), [_t(r, 3, 4), _t(r, 4)]),
    "sub": lambda r: (lambda a, b: F.sum((a - b) * (a - b)), [_t(r, 3), _t(r, 3)]),
    "mul_broadcast": lambda r: (lambda a, b: F.sum(a * b), [_t(r, 2, 3), _t(r, 2, 1)]),
    "div": lambda r: (lambda a, b: F.sum(a / b), [_t(r, 4), _t(r, 4, positive=True)]),
    "matmul_vec": lambda r: (lambda a, b: F.sum(F.tanh(a @ b)), [_t(r, 3), _t(r, 3, 2)]),
    "matmul_mat": lambda r: (lambda a, b: F.sum(F.tanh(a @ b)), [_t(r, 2, 3), _t(r, 3, 4)]),
    "exp_log": lambda r: (lambda a: F.sum(F.log(F.exp(a) + 1.0)), [_t(r, 5)]),
    "sqrt": lambda r: (lambda a: F.sum(F.sqrt(a)), [_t(r, 4, positive=True)]),
    "sigmoid": lambda r: (lambda a: F.sum(F.sigmoid(a) * a), [_t(r, 6)]),
    "relu": lambda r: (lambda a: F.sum(F.relu(a) * a), [_t(r, 6)]),
    "softmax": lambda r: (lambda a, w=r.normal(size=(2, 5)): F.sum(F.softmax(a) * w), [_t(r, 2, 5)]),
    "log_softmax": lambda r: (lambda a, w=r.normal(size=(3, 4)): F.sum(F.log_softmax(a) * w), [_t(r, 3, 4)]),
    "cross_entropy": lambda r: (lambda a, y=r.integers(0, 5, size=3): F.cross_entropy(a, y), [_t(r, 3, 5)]),
    "index_concat_stack": lambda r: (
        lambda a, b: F.sum(F.stack([a[1:], b]) * F.concat([a[:2], b[::-1]]).reshape(2, 2)),
        [_t(r, 3), _t(r, 2)],
    ),
    "mean_transpose": lambda r: (lambda a: F.mean(F.transpose(a) @ a), [_t(r, 3, 2)]),
    "cosine": lambda r: (lambda u, v: F.cosine_similarity(u, v), [_t(r, 5), _t(r, 5)]),
    "cosine_matrix": lambda r: (lambda a, b: F.sum(F.cosine_matrix(a, b) * 1.3), [_t(r, 2, 4), _t(r, 3, 4)]),
}


@pytest.mark.parametrize("name", sorted(CASES))
@pytest.mark.parametrize("seed", range(3))
def test_primitive_gradients(name, seed):
    rng = np.random.default_rng(seed)
    fn, params = CASES[name](rng)
    assert check_gradients(lambda: fn(*params), params) <= TOL


def test_conv_pool_dense_stack():
    rng = np.random.default_rng(0)
    x = _t(rng, 2, 2, 4, 4)
    w = Tensor(rng.normal(size=(3, 2, 3, 3)) * 0.5, requires_grad=True)
    b = _t(rng, 3)
    wd = Tensor(rng.normal(size=(12, 2)) * 0.3, requires_grad=True)

    def fn():
        h = F.maxpool2d(F.relu(F.conv2d(x, w, b)))
        return F.cross_entropy(F.dense(h.reshape(2, 12), wd), [0, 1])

    assert check_gradients(fn, [x, w, b, wd]) <= TOL


def test_lstm_all_parameters():
    rng = np.random.default_rng(1)
    params = LstmParams.init(3, 2, rng, state_dim=4)
    params.b.data[:] = rng.normal(size=8)
    h, c, x = _t(rng, 2, 4), _t(rng, 2, 2), _t(rng, 2, 3)

    def fn():
        h1, c1 = lstm_step(params, h, c, x)
        return F.sum(h1 * h1) + F.sum(c1)

    assert check_gradients(fn, params.parameters() + [h, c, x]) <= TOL
