import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shapebias.diffcore import (
    SGD,
    LstmParams,
    RMSProp,
    Tensor,
    cosine_similarity,
    dumps,
    forward_backward,
    loads,
    lstm_step,
)
from shapebias.diffcore import functional as F
from shapebias.diffcore import _kernels_py, kernels
from shapebias.diffcore.gradcheck import check_gradients
from shapebias.errors import ContractError, DecodeError, NumericError


def test_square_grad():
    x = Tensor(3.0, requires_grad=True)
    assert forward_backward(x * x, [x])[x] == 6.0


def test_product_grads():
    x, y = Tensor(2.0, requires_grad=True), Tensor(5.0, requires_grad=True)
    g = forward_backward(x * y, [x, y])
    assert (g[x], g[y]) == (5.0, 2.0)


def test_softmax_cross_entropy_zero_logits():
    logits = Tensor(np.zeros(4), requires_grad=True)
    g = forward_backward(F.cross_entropy(logits, [0]), [logits])[logits]
    np.testing.assert_allclose(g, [0.25 - 1, 0.25, 0.25, 0.25], atol=1e-15)


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2).backward()


def test_non_finite_forward_names_node():
    x = Tensor(np.array([1000.0]), requires_grad=True)
    with pytest.raises(NumericError, match="exp"):
        F.exp(x)


def test_backward_leaves_values_unchanged():
    x = Tensor(np.array([0.5, -1.0]), requires_grad=True)
    y = F.tanh(x)
    before = y.data.copy()
    F.sum(y * y).backward()
    np.testing.assert_array_equal(y.data, before)
    np.testing.assert_array_equal(x.data, [0.5, -1.0])


def test_shared_subexpression_visited_once():
    # f = (x*x) + (x*x) with the product node reused
    x = Tensor(1.5, requires_grad=True)
    sq = x * x
    assert forward_backward(sq + sq, [x])[x] == pytest.approx(6.0)


@pytest.mark.parametrize("u, v, expected", [
    ((1, 2, 3), (1, 2, 3), 1.0),
    ((1, 0), (0, 1), 0.0),
    ((1, 0), (-1, 0), -1.0),
])
def test_cosine_examples(u, v, expected):
    assert cosine_similarity(Tensor(u), Tensor(v)).item() == pytest.approx(expected, abs=1e-15)


def test_cosine_zero_norm_raises():
    with pytest.raises(NumericError):
        cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 0.0]))


@settings(max_examples=100, deadline=None)
@given(
    arrays(np.float64, 5, elements=st.floats(-10, 10)).filter(lambda u: np.linalg.norm(u) > 1e-3),
    st.floats(1e-3, 1e3),
)
def test_cosine_scale_invariance(u, alpha):
    assert cosine_similarity(Tensor(u), Tensor(alpha * u)).item() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 6), elements=st.floats(-700, 700)))
def test_softmax_is_a_distribution(logits):
    p = F.softmax(Tensor(logits)).data
    assert (p >= 0).all()
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-9)


def test_lstm_zero_params_zero_state():
    params = LstmParams.zeros(3, 1)
    h, c = lstm_step(params, Tensor(np.zeros(1)), Tensor(np.zeros(1)), Tensor([0.3, -2.0, 7.0]))
    assert h.data.tolist() == [0.0] and c.data.tolist() == [0.0]


def test_lstm_zero_params_unit_cell():
    params = LstmParams.zeros(2, 1)
    h, c = lstm_step(params, Tensor(np.zeros(1)), Tensor(np.ones(1)), Tensor([1.0, 1.0]))
    # gates are sigmoid(0) = 1/2, candidate tanh(0) = 0
    assert c.item() == 0.5
    assert h.item() == pytest.approx(0.5 * math.tanh(0.5), abs=1e-15)
    assert h.item() == pytest.approx(0.23106, abs=5e-6)


def test_lstm_dimension_mismatch():
    params = LstmParams.zeros(2, 3)
    with pytest.raises(ContractError):
        lstm_step(params, Tensor(np.zeros(3)), Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_lstm_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    params = LstmParams.init(4, 3, rng)
    params.b.data[:] = rng.normal(size=12)
    h, c = Tensor(rng.normal(size=3)), Tensor(rng.normal(size=3))
    x = Tensor(rng.normal(size=4), requires_grad=True)
    assert check_gradients(lambda: F.sum(lstm_step(params, h, c, x)[0]), [x]) <= 1e-4


def test_sgd_step():
    w = Tensor(np.array([1.0]))
    SGD(0.1).step([w], [np.array([2.0])])
    assert w.data[0] == pytest.approx(0.8, abs=1e-15)
    SGD(0.1).step([w], [np.array([0.0])])
    assert w.data[0] == pytest.approx(0.8, abs=1e-15)


def test_rmsprop_step():
    w = Tensor(np.array([0.0]))
    opt = RMSProp(lr=0.001, decay=0.9, eps=1e-8)
    opt.step([w], [np.array([1.0])])
    (acc,) = opt.accumulators.values()
    assert acc[0] == pytest.approx(0.1, abs=1e-15)
    assert w.data[0] == pytest.approx(-0.001 / math.sqrt(0.1 + 1e-8), rel=1e-12)
    assert w.data[0] == pytest.approx(-0.0031623, abs=1e-7)


def test_optimizer_shape_mismatch():
    with pytest.raises(ContractError):
        SGD(0.1).step([Tensor(np.zeros(2))], [np.zeros(3)])
    with pytest.raises(ContractError):
        SGD(0.0)


def test_forward_determinism():
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(size=(2, 3, 8, 8)))
    w = Tensor(rng.normal(size=(4, 3, 3, 3)))
    b = Tensor(rng.normal(size=4))
    a1 = F.maxpool2d(F.relu(F.conv2d(x, w, b))).data
    a2 = F.maxpool2d(F.relu(F.conv2d(x, w, b))).data
    assert a1.tobytes() == a2.tobytes()


def test_conv_matches_direct_loop():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 3, 5, 4))
    w = rng.normal(size=(2, 3, 3, 3))
    b = rng.normal(size=2)
    got = F.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    want = np.zeros((2, 2, 5, 4))
    for n in range(2):
        for f in range(2):
            for i in range(5):
                for j in range(4):
                    want[n, f, i, j] = (xp[n, :, i:i + 3, j:j + 3] * w[f]).sum() + b[f]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_maxpool_values():
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
    np.testing.assert_array_equal(F.maxpool2d(Tensor(x)).data[0, 0], [[5, 7], [13, 15]])


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernels not built")
def test_backends_bit_identical():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 4, 6, 8))
    c, p = kernels.compiled_backend, _kernels_py
    cols = c.im2col3x3(x)
    assert np.array_equal(cols, p.im2col3x3(x))
    assert np.array_equal(c.col2im3x3(cols, 3, 4, 6, 8), p.col2im3x3(cols, 3, 4, 6, 8))
    oc, ic = c.maxpool2x2(x)
    op, ip = p.maxpool2x2(x)
    assert np.array_equal(oc, op) and np.array_equal(ic, ip)
    assert np.array_equal(c.maxpool2x2_backward(oc, ic), p.maxpool2x2_backward(op, ip))


def test_checkpoint_round_trip():
    rng = np.random.default_rng(0)
    params = {"conv1.w": rng.normal(size=(2, 3, 3, 3)), "b": rng.normal(size=4), "s": np.array(2.5)}
    blob = dumps(params, meta="parent=emb.spck")
    assert blob.startswith(b"SPCK1")
    back, meta = loads(blob)
    assert meta == "parent=emb.spck"
    assert list(back) == list(params)
    for k in params:
        assert np.array_equal(back[k], params[k])


def test_checkpoint_layout():
    blob = dumps({"a": np.array([1.0])})
    assert blob == b"SPCK1" + b"\x01\x00\x00\x00a" + b"\x01\x00\x00\x00" + b"\x01\x00\x00\x00" + np.float64(1).tobytes()


def test_checkpoint_truncated():
    with pytest.raises(DecodeError):
        loads(dumps({"a": np.ones(3)})[:-4])
    with pytest.raises(DecodeError):
        loads(b"NOPE")
