"""Pure-numpy reference kernels for 3x3 convolution and 2x2 max-pooling.

These are the fallback used when the compiled ``_kernels`` extension is not
available.  Accumulation order matches the compiled kernels so both backends
produce bit-identical results.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col3x3(x):
    """Unfold zero-padded 3x3 neighbourhoods.

    x has shape (N, C, H, W); the result has shape (N*H*W, C*9) with rows
    ordered (n, i, j) and columns ordered (c, ki, kj).
    """
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * w, c * 9)


def col2im3x3(cols, n, c, h, w):
    """Adjoint of :func:`im2col3x3`: scatter-add columns back onto the image."""
    c6 = cols.reshape(n, h, w, c, 3, 3)
    out = np.zeros((n, c, h + 2, w + 2))
    for ki in range(3):
        for kj in range(3):
            out[:, :, ki:ki + h, kj:kj + w] += c6[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
    return np.ascontiguousarray(out[:, :, 1:-1, 1:-1])


def maxpool2x2(x):
    """Return (pooled, argmax) where argmax in [0, 4) indexes the window row-major."""
    n, c, h, w = x.shape
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(out), idx.astype(np.int8)


def maxpool2x2_backward(grad, idx):
    n, c, ho, wo = grad.shape
    win = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(win, idx.astype(np.intp)[..., None], grad[..., None], axis=-1)
    return np.ascontiguousarray(
        win.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * 2, wo * 2)
    )
