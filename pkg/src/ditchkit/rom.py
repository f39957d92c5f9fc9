"""Linear reduced-order baselines: POD projection and exact DMD.

Snapshots are column vectors: X has shape (n_state, n_snapshots).  DMD
fits a best-fit linear operator advancing X to X' and exposes its
spectrum; prediction is x_t = Phi Lambda^t b with b solved from the
first snapshot in a least-squares sense.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (ChecksumError, ConfigError, MagicError, NumericError,
                     TruncatedError, VersionError)

DROM_MAGIC = b"DROM"
DROM_VERSION = 1
_RANK_RTOL = 1e-12


def pod_fit(snapshots: np.ndarray, rank: int) -> np.ndarray:
    """Leading left singular vectors of the snapshot matrix, (n, rank)."""
    x = np.asarray(snapshots, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError("snapshots must be a 2-D (state, time) matrix")
    if not 1 <= rank <= min(x.shape):
        raise ConfigError(f"rank {rank} outside 1..{min(x.shape)}")
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    _check_rank(s, rank)
    return u[:, :rank]


def pod_reconstruct(basis: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of x (columns) onto the basis span."""
    return basis @ (basis.T @ x)


def pod_energy(snapshots: np.ndarray) -> np.ndarray:
    """Cumulative fraction of squared singular values per mode count."""
    s = np.linalg.svd(np.asarray(snapshots, dtype=np.float64),
                      compute_uv=False)
    e = s * s
    return np.cumsum(e) / np.sum(e)


def _check_rank(s: np.ndarray, rank: int) -> None:
    if s[0] == 0.0:
        raise NumericError("rank deficient: all singular values are zero")
    bad = np.nonzero(s[:rank] <= _RANK_RTOL * s[0])[0]
    if bad.size:
        raise NumericError(
            f"rank deficient: singular value {bad[0]} is zero at the "
            f"requested rank {rank}")


@dataclass(frozen=True)
class DmdModel:
    eigvals: np.ndarray    # (r,) complex
    modes: np.ndarray      # (n, r) complex
    amplitudes: np.ndarray  # (r,) complex
    rank: int


def dmd_fit(x: np.ndarray, xp: np.ndarray, rank: int) -> DmdModel:
    """Exact DMD of the pair (X, X') truncated to the given rank.

    Multiple trajectories may be concatenated column-wise as long as each
    X column pairs with the X' column one step later.
    """
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    if x.shape != xp.shape or x.ndim != 2:
        raise ConfigError("X and X' must be equal-shape 2-D matrices")
    if not 1 <= rank <= min(x.shape):
        raise ConfigError(f"rank {rank} outside 1..{min(x.shape)}")
    u, s, vh = np.linalg.svd(x, full_matrices=False)
    _check_rank(s, rank)
    u_r = u[:, :rank]
    s_r = s[:rank]
    v_r = vh[:rank].T
    atilde = u_r.T @ xp @ (v_r / s_r)
    eigvals, w = np.linalg.eig(atilde)
    modes = xp @ (v_r / s_r) @ w
    amplitudes, *_ = np.linalg.lstsq(modes, x[:, 0], rcond=None)
    return DmdModel(eigvals=eigvals, modes=modes, amplitudes=amplitudes,
                    rank=rank)


def dmd_predict(model: DmdModel, n_steps: int) -> np.ndarray:
    """Real-part reconstruction for t = 0 .. n_steps-1, shape (n, n_steps)."""
    t = np.arange(n_steps)
    dyn = model.eigvals[:, None] ** t[None, :] * model.amplitudes[:, None]
    return np.real(model.modes @ dyn)


def save_drom(model: DmdModel, path) -> None:
    n = model.modes.shape[0]
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<c16").tobytes()
        for a in (model.eigvals, model.modes, model.amplitudes))
    with open(path, "wb") as fh:
        fh.write(DROM_MAGIC)
        fh.write(struct.pack("<III", DROM_VERSION, model.rank, n))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_drom(path) -> DmdModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DROM_MAGIC:
        raise MagicError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 16:
        raise TruncatedError(f"{path}: header truncated")
    version, rank, n = struct.unpack_from("<III", blob, 4)
    if version != DROM_VERSION:
        raise VersionError(f"{path}: unsupported version {version}")
    n_cplx = rank + n * rank + rank
    need = 16 + 16 * n_cplx + 4
    if len(blob) < need:
        raise TruncatedError(f"{path}: expected {need} bytes, got "
                             f"{len(blob)}")
    payload = blob[16:16 + 16 * n_cplx]
    (crc,) = struct.unpack_from("<I", blob, 16 + 16 * n_cplx)
    if crc != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise ChecksumError(f"{path}: checksum mismatch")
    flat = np.frombuffer(payload, dtype="<c16")
    eigvals = flat[:rank].copy()
    modes = flat[rank:rank + n * rank].reshape(n, rank).copy()
    amplitudes = flat[rank + n * rank:].copy()
    return DmdModel(eigvals=eigvals, modes=modes, amplitudes=amplitudes,
                    rank=rank)


def trajectory_pairs(frames: np.ndarray) -> tuple:
    """Flatten (T, H, W) frames into the DMD pair (X, X')."""
    f = np.asarray(frames, dtype=np.float64)
    if f.shape[0] < 2:
        raise ConfigError("need at least two frames for a DMD pair")
    flat = f.reshape(f.shape[0], -1).T
    return flat[:, :-1], flat[:, 1:]


def multi_trajectory_pairs(cases: list) -> tuple:
    """Column-concatenated (X, X') over several (T, H, W) trajectories."""
    xs, xps = zip(*(trajectory_pairs(c) for c in cases))
    return np.concatenate(xs, axis=1), np.concatenate(xps, axis=1)
