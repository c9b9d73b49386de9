"""LSTM cell with sigmoid input/forget/output gates and tanh candidate."""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from . import functional as F
from .init import glorot_uniform
from .tensor import Tensor


@dataclass
class LstmParams:
    """Gate blocks are packed column-wise in the order input, forget, output, candidate.

    ``w_x`` maps the input (in_dim) and ``w_h`` maps the recurrent state
    (state_dim, usually the hidden size) to the 4*hidden pre-activations.
    """

    w_x: Tensor
    w_h: Tensor
    b: Tensor

    def __post_init__(self):
        four_h = self.b.shape[0]
        if four_h % 4 or four_h == 0:
            raise ContractError("bias length must be a positive multiple of 4")
        if self.w_x.shape[1] != four_h or self.w_h.shape[1] != four_h:
            raise ContractError("all gate blocks must share the hidden size")

    @property
    def hidden_size(self):
        return self.b.shape[0] // 4

    def parameters(self):
        return [self.w_x, self.w_h, self.b]

    @classmethod
    def init(cls, in_dim, hidden, rng, state_dim=None):
        state_dim = hidden if state_dim is None else state_dim
        return cls(
            Tensor(glorot_uniform(rng, in_dim, 4 * hidden), requires_grad=True),
            Tensor(glorot_uniform(rng, state_dim, 4 * hidden), requires_grad=True),
            Tensor(np.zeros(4 * hidden), requires_grad=True),
        )

    @classmethod
    def zeros(cls, in_dim, hidden, state_dim=None):
        state_dim = hidden if state_dim is None else state_dim
        return cls(
            Tensor(np.zeros((in_dim, 4 * hidden)), requires_grad=True),
            Tensor(np.zeros((state_dim, 4 * hidden)), requires_grad=True),
            Tensor(np.zeros(4 * hidden), requires_grad=True),
        )


def lstm_step(params, h, c, x):
    """One LSTM update; ``h``/``c``/``x`` may be vectors or row batches.

    Returns (h_next, c_next).
    """
    n = params.hidden_size
    if x.shape[-1] != params.w_x.shape[0] or h.shape[-1] != params.w_h.shape[0] or c.shape[-1] != n:
        raise ContractError(
            f"lstm_step dimension mismatch: x {x.shape}, h {h.shape}, c {c.shape}, hidden {n}"
        )
    z = F.matmul(x, params.w_x) + F.matmul(h, params.w_h) + params.b
    if z.ndim == 1:
        i, f, o, g = (z[k * n:(k + 1) * n] for k in range(4))
    else:
        i, f, o, g = (z[:, k * n:(k + 1) * n] for k in range(4))
    c_next = F.sigmoid(f) * c + F.sigmoid(i) * F.tanh(g)
    h_next = F.sigmoid(o) * F.tanh(c_next)
    return h_next, c_next
