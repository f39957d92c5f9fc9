"""Seeded weight initialisers."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..rng import Rng


def glorot_uniform(shape, fan_in: int, fan_out: int, rng: Rng,
                   dtype=np.float32) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def orthogonal(rows: int, cols: int, rng: Rng, dtype=np.float32) -> np.ndarray:
    """Random orthonormal matrix via QR with the sign fix.

    Columns are orthonormal for rows >= cols, rows otherwise.
    """
    if rows < cols:
        return orthogonal(cols, rows, rng, dtype).T.copy()
    g = rng.normal(size=(rows, cols))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]
    return q.astype(dtype)


def lstm_bias(n_units: int, dtype=np.float32) -> np.ndarray:
    """Single 4n gate bias, zero except the forget block set to one."""
    b = np.zeros(4 * n_units, dtype=dtype)
    b[n_units:2 * n_units] = 1.0
    return b


def koopman_rotations(m: int, dtype=np.float32) -> np.ndarray:
    """Block-diagonal 2x2 rotations with equidistant unit-circle spectrum.

    For even m the blocks rotate by (2j - 1) pi / m, j = 1..m/2, so the
    eigenvalues exp(+-i phi_j) are equally spaced on the unit circle.
    """
    if m % 2 != 0:
        raise ConfigError(f"rotation initialiser needs an even size, got {m}")
    k = np.zeros((m, m), dtype=np.float64)
    for j in range(m // 2):
        phi = (2 * j + 1) * np.pi / m
        c, s = np.cos(phi), np.sin(phi)
        k[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, -s], [s, c]]
    return k.astype(dtype)
