"""Minimal float64 reverse-mode autodiff: tensors, layers, LSTM cell, optimizers."""

from . import functional
from .checkpoint import dumps, loads
from .functional import cosine_matrix, cosine_similarity
from .init import glorot_uniform
from .kernels import BACKEND
from .lstm import LstmParams, lstm_step
from .optim import SGD, RMSProp, make_optimizer
from .tensor import Tensor, forward_backward

__all__ = [
    "BACKEND", "LstmParams", "RMSProp", "SGD", "Tensor", "cosine_matrix", "cosine_similarity",
    "dumps", "forward_backward", "functional", "glorot_uniform", "loads", "lstm_step",
    "make_optimizer",
]
