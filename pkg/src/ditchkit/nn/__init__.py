"""Minimal deterministic tensor core.

Dense, strided/transposed convolution, LSTM and non-local attention
layers with hand-written forward and backward passes on numpy arrays
(channels-last), a named parameter store with Adam, and seeded
initialisers.  Only the fixed layer set needed by the surrogate models
is differentiated; there is no general autodiff graph.
"""

from .optim import ParamStore
from .layers import (Conv2D, Conv2DTranspose, Dense, Flatten, LSTM,
                     LeakyReLU, NonLocalBlock, Reshape, leaky_relu, sigmoid,
                     softmax)
from .initializers import (glorot_uniform, koopman_rotations, lstm_bias,
                           orthogonal)
from .gradcheck import max_grad_error
from .checkpoint import load_dkpt, save_dkpt

__all__ = [
    "ParamStore", "Conv2D", "Conv2DTranspose", "Dense", "Flatten", "LSTM",
    "LeakyReLU", "NonLocalBlock", "Reshape", "leaky_relu", "sigmoid",
    "softmax", "glorot_uniform", "koopman_rotations", "lstm_bias",
    "orthogonal", "max_grad_error", "load_dkpt", "save_dkpt",
]
