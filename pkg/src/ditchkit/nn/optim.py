"""Named parameter store with gradient accumulation and Adam."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7


class ParamStore:
    """Flat registry of named parameters, their grads and Adam moments.

    Iteration order is always sorted by name, so optimiser sweeps are
    deterministic regardless of registration order.
    """

    def __init__(self, dtype=np.float32):
        self.dtype = dtype
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.t = 0

    @property
    def names(self) -> list:
        return sorted(self.params)

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        arr = np.asarray(value, dtype=self.dtype)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        return arr

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self.grads[name] += grad.astype(self.dtype, copy=False)

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0.0

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def adam_step(self, lr: float = 1e-3, beta1: float = ADAM_BETA1,
                  beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> None:
        """One Adam update from the accumulated gradients."""
        self.t += 1
        b1t = 1.0 - beta1 ** self.t
        b2t = 1.0 - beta2 ** self.t
        for name in self.names:
            g = self.grads[name]
            if name not in self._m:
                self._m[name] = np.zeros_like(g)
                self._v[name] = np.zeros_like(g)
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            m_hat = m / b1t
            v_hat = v / b2t
            self.params[name] -= (lr * m_hat
                                  / (np.sqrt(v_hat) + eps)).astype(self.dtype)

    def state_arrays(self) -> dict:
        return dict(self.params)

    def load_arrays(self, arrays: dict) -> None:
        for name in self.names:
            if name not in arrays:
                raise ConfigError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != self.params[name].shape:
                raise ConfigError(f"shape mismatch for {name!r}: "
                                  f"{arrays[name].shape} vs "
                                  f"{self.params[name].shape}")
            self.params[name][...] = arrays[name].astype(self.dtype)
