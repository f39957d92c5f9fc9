"""Spatio-temporal load datasets from scenario sweeps.

A case record is the pressure history of one ditching case on a fixed
patch of the hull grid: frames sampled every ``step_every`` solver steps
starting at impact, cut to an (H, W) window in (frame, arc) indices,
smoothed with a sum-preserving 3x3 blur, kept in pascals.  Sampling
stops once the raw patch maximum falls below ``stop_threshold``.

The on-disk format (.dlf) is little-endian:

    magic "DLF1" | u32 version | u32 n_cases
    per case: f64 u0, w0, pitch0 | u32 n_t, H, W | u32 origin (frame, arc)
              | f32 payload, row-major (n_t, H, W)
    trailer:  f64 x_min, x_max | u32 CRC32 over all payload bytes

x_min/x_max are the normalisation constants of the generating run,
always taken from the training split.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (ChecksumError, ConfigError, MagicError, TruncatedError,
                     VersionError)
from .dynamics import LoadHistory
from .rng import Rng

DLF_MAGIC = b"DLF1"
DLF_VERSION = 1
STOP_THRESHOLD = 5000.0   # Pa
STEP_EVERY = 20
MIN_FRAMES = 4            # window length 3 needs one target on top


@dataclass
class CaseRecord:
    u0: float
    w0: float
    pitch0_deg: float
    frames: np.ndarray          # (n_t, H, W) float32, pascals
    origin: tuple               # (frame0, arc0) of the patch window

    @property
    def n_t(self) -> int:
        return self.frames.shape[0]

    @property
    def case_max(self) -> float:
        return float(self.frames.max())


@dataclass
class Dataset:
    train: list
    val: list
    test: list
    x_min: float
    x_max: float
    meta: dict = field(default_factory=dict)

    def split(self, name: str) -> list:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def gaussian_blur3(frame: np.ndarray) -> np.ndarray:
    """Sum-preserving 3x3 binomial blur.

    Each input cell scatters its value with (1,2,1)x(1,2,1)/16 weights
    restricted to the grid; the weights of every source cell are
    renormalised, so boundary cells lose nothing (a corner impulse
    becomes the 2x2 block {4,2;2,1}/9).
    """
    x = np.asarray(frame, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError("blur expects a single (H, W) frame")
    h, w = x.shape
    line_h = np.full(h, 4.0)
    line_w = np.full(w, 4.0)
    if h > 1:
        line_h[0] = line_h[-1] = 3.0
    if w > 1:
        line_w[0] = line_w[-1] = 3.0
    if h == 1:
        line_h[0] = 2.0
    if w == 1:
        line_w[0] = 2.0
    xs = x / np.outer(line_h, line_w)
    out = np.zeros_like(x)
    kernel = np.array([1.0, 2.0, 1.0])
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            wgt = kernel[di + 1] * kernel[dj + 1]
            src_i = slice(max(0, -di), h - max(0, di))
            dst_i = slice(max(0, di), h - max(0, -di))
            src_j = slice(max(0, -dj), w - max(0, dj))
            dst_j = slice(max(0, dj), w - max(0, -dj))
            out[dst_i, dst_j] += wgt * xs[src_i, src_j]
    return out.astype(frame.dtype) if frame.dtype != np.float64 else out


def normalize(x: np.ndarray, x_min: float, x_max: float) -> np.ndarray:
    """Min-max map to [0, 1] on the training range; no clipping."""
    if not x_max > x_min:
        raise ConfigError(f"degenerate normalisation range [{x_min}, {x_max}]")
    return (np.asarray(x) - x_min) / (x_max - x_min)


def denormalize(x: np.ndarray, x_min: float, x_max: float) -> np.ndarray:
    return np.asarray(x) * (x_max - x_min) + x_min


def choose_patch_window(load_sum: np.ndarray, h: int, w: int) -> tuple:
    """Window origin maximising cumulative load inside an (h, w) patch.

    ``load_sum`` is the (n_frames, n_arc) accumulation over the training
    sweep.  Ties take the first origin in row-major order.
    """
    nf, na = load_sum.shape
    if h > nf or w > na:
        raise ConfigError(f"patch {h}x{w} exceeds grid {nf}x{na}")
    ii = np.zeros((nf + 1, na + 1))
    ii[1:, 1:] = np.cumsum(np.cumsum(load_sum, axis=0), axis=1)
    windows = (ii[h:, w:] - ii[:-h, w:] - ii[h:, :-w] + ii[:-h, :-w])
    flat = int(np.argmax(windows))
    return flat // windows.shape[1], flat % windows.shape[1]


def sample_full_frames(history: LoadHistory, step_every: int = STEP_EVERY,
                       stop_threshold: float = STOP_THRESHOLD) -> np.ndarray:
    """Full-grid pressure frames every ``step_every`` steps from impact.

    Sampling keeps a frame while the preceding frames stayed at or above
    the threshold anywhere on the grid (a superset of any patch cut).
    """
    if history.impact_step < 0:
        return np.zeros((0, history.n_frames, history.n_arc))
    stride = int(history.field_steps[1] - history.field_steps[0]) \
        if len(history.field_steps) > 1 else 1
    if stride != 1:
        raise ConfigError("patch extraction needs per-step pressure fields")
    frames = []
    step = history.impact_step
    while step < history.pressures.shape[0]:
        frame = history.pressures[step].astype(np.float64)
        frames.append(frame)
        if len(frames) > 1 and frame.max() < stop_threshold:
            break
        step += step_every
    return np.stack(frames)


def cut_patch(full_frames: np.ndarray, origin: tuple, size: tuple,
              stop_threshold: float = STOP_THRESHOLD) -> np.ndarray:
    """Apply the window and the patch-max stop rule."""
    f0, a0 = origin
    h, w = size
    cut = full_frames[:, f0:f0 + h, a0:a0 + w]
    if cut.shape[1:] != (h, w):
        raise ConfigError(f"window {origin}+{size} exceeds grid "
                          f"{full_frames.shape[1:]}")
    keep = cut.shape[0]
    for i in range(1, cut.shape[0]):
        if cut[i].max() < stop_threshold:
            keep = i  # sampling stops at the first sub-threshold frame
            break
    return cut[:keep]


def extract_patches(history: LoadHistory, origin: tuple, size: tuple,
                    step_every: int = STEP_EVERY,
                    stop_threshold: float = STOP_THRESHOLD,
                    blur: bool = True, scenario=None) -> CaseRecord:
    """Case record from one simulated history (sample, cut, blur).

    A history that never impacts yields an empty record; sweep assembly
    is where short cases get rejected.
    """
    full = sample_full_frames(history, step_every, stop_threshold)
    if full.shape[0] == 0:
        return CaseRecord(
            scenario.u0 if scenario is not None else np.nan,
            scenario.w0 if scenario is not None else np.nan,
            scenario.pitch0_deg if scenario is not None else np.nan,
            np.zeros((0,) + tuple(size), dtype=np.float32), tuple(origin))
    cut = cut_patch(full, origin, size, stop_threshold)
    if blur:
        cut = np.stack([gaussian_blur3(f) for f in cut])
    u0 = scenario.u0 if scenario is not None else np.nan
    w0 = scenario.w0 if scenario is not None else np.nan
    pitch = scenario.pitch0_deg if scenario is not None else np.nan
    return CaseRecord(u0, w0, pitch, cut.astype(np.float32), tuple(origin))


def sweep_velocities(u_range: tuple, w_range: tuple, counts: tuple,
                     seed: int, pitch_deg: float = 6.0,
                     inner_margin: float = 0.03) -> dict:
    """Deterministic quasi-uniform (u0, w0) pairs per split.

    Each split fills a near-square lattice over its box with cell-centre
    points; the seed selects which lattice cells are used when the
    lattice is larger than the requested count.  Validation and test
    boxes are shrunk by ``inner_margin`` of the range per side, so their
    pairs lie strictly inside the training hull.
    """
    out = {}
    for idx, (name, n) in enumerate(zip(("train", "val", "test"), counts)):
        if n <= 0:
            out[name] = []
            continue
        m = 0.0 if name == "train" else inner_margin
        ulo = u_range[0] + m * (u_range[1] - u_range[0])
        uhi = u_range[1] - m * (u_range[1] - u_range[0])
        wlo = w_range[0] + m * (w_range[1] - w_range[0])
        whi = w_range[1] - m * (w_range[1] - w_range[0])
        g1 = int(np.ceil(np.sqrt(n)))
        g2 = int(np.ceil(n / g1))
        cells = [(i, j) for i in range(g1) for j in range(g2)]
        order = Rng(seed).child(idx).permutation(len(cells))
        picked = [cells[k] for k in order[:n]]
        pts = [(ulo + (i + 0.5) * (uhi - ulo) / g1,
                wlo + (j + 0.5) * (whi - wlo) / g2,
                pitch_deg) for i, j in picked]
        out[name] = pts
    return out


def build_dataset(mesh, scenario_factory, pairs: dict, patch: tuple,
                  step_every: int = STEP_EVERY,
                  stop_threshold: float = STOP_THRESHOLD,
                  blur: bool = True, simulate_fn=None,
                  progress=None) -> Dataset:
    """Simulate a sweep and assemble the three splits.

    ``scenario_factory(u0, w0, pitch_deg)`` builds one scenario;
    ``pairs`` maps split names to velocity tuples.  The patch window is
    the one maximising cumulative raw load over the training split, and
    the normalisation constants come from the blurred training frames.
    """
    from .dynamics import simulate as _simulate
    sim = simulate_fn or _simulate

    sampled = {}
    for name in ("train", "val", "test"):
        rows = []
        for case_i, (u0, w0, pitch) in enumerate(pairs.get(name, [])):
            scen = scenario_factory(u0, w0, pitch)
            history = sim(mesh, scen)
            full = sample_full_frames(history, step_every, stop_threshold)
            rows.append(((u0, w0, pitch), full))
            if progress:
                progress(name, case_i, scen)
        sampled[name] = rows
    return assemble_dataset(sampled, patch, step_every=step_every,
                            stop_threshold=stop_threshold, blur=blur)


def assemble_dataset(sampled: dict, patch: tuple,
                     step_every: int = STEP_EVERY,
                     stop_threshold: float = STOP_THRESHOLD,
                     blur: bool = True) -> Dataset:
    """Second stage of the build: window choice, cut, blur, splits.

    ``sampled`` maps split names to lists of ((u0, w0, pitch_deg),
    full_frames) rows, e.g. produced by :func:`sample_full_frames` over
    a sweep (possibly in parallel).
    """
    rows_train = sampled.get("train", [])
    if not rows_train:
        raise ConfigError("sweep contains no training cases")
    load_sum = rows_train[0][1].sum(axis=0)
    for _, full in rows_train[1:]:
        load_sum = load_sum + full.sum(axis=0)

    origin = choose_patch_window(load_sum, patch[0], patch[1])
    splits = {}
    for name in ("train", "val", "test"):
        records = []
        for (u0, w0, pitch), full in sampled.get(name, []):
            cut = cut_patch(full, origin, patch, stop_threshold)
            if cut.shape[0] < MIN_FRAMES:
                raise ConfigError(
                    f"case (u0={u0:.2f}, w0={w0:.2f}) yields "
                    f"{cut.shape[0]} frames, needs at least {MIN_FRAMES}")
            if blur:
                cut = np.stack([gaussian_blur3(f) for f in cut])
            records.append(CaseRecord(u0, w0, pitch,
                                      cut.astype(np.float32), origin))
        splits[name] = records

    train_stack = np.concatenate([r.frames.reshape(r.n_t, -1)
                                  for r in splits["train"]], axis=0)
    x_min = float(train_stack.min())
    x_max = float(train_stack.max())
    if not x_max > x_min:
        raise ConfigError("training split has a degenerate load range")
    return Dataset(splits["train"], splits["val"], splits["test"],
                   x_min, x_max,
                   meta={"patch": list(patch), "origin": list(origin),
                         "step_every": step_every,
                         "stop_threshold": stop_threshold})


def write_dlf(cases: list, x_min: float, x_max: float, path) -> None:
    """Write one split to a .dlf file (bit-exact round trip)."""
    crc = 0
    with open(path, "wb") as fh:
        fh.write(DLF_MAGIC)
        fh.write(struct.pack("<II", DLF_VERSION, len(cases)))
        for rec in cases:
            n_t, h, w = rec.frames.shape
            fh.write(struct.pack("<dddIIIII", rec.u0, rec.w0, rec.pitch0_deg,
                                 n_t, h, w, rec.origin[0], rec.origin[1]))
            payload = np.ascontiguousarray(rec.frames,
                                           dtype="<f4").tobytes()
            crc = zlib.crc32(payload, crc)
            fh.write(payload)
        fh.write(struct.pack("<ddI", x_min, x_max, crc & 0xFFFFFFFF))


def read_dlf(path):
    """Read one split; returns (cases, x_min, x_max)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != DLF_MAGIC:
        raise MagicError(f"{path}: not a DLF file")
    off = 4
    version, n_cases = struct.unpack_from("<II", blob, off)
    off += 8
    if version != DLF_VERSION:
        raise VersionError(f"{path}: unsupported DLF version {version}")
    cases = []
    crc = 0
    for _ in range(n_cases):
        if off + 44 > len(blob):
            raise TruncatedError(f"{path}: truncated case header")
        u0, w0, pitch, n_t, h, w, f0, a0 = struct.unpack_from("<dddIIIII",
                                                              blob, off)
        off += 44
        n_bytes = n_t * h * w * 4
        if off + n_bytes > len(blob):
            raise TruncatedError(f"{path}: truncated payload")
        payload = blob[off:off + n_bytes]
        off += n_bytes
        crc = zlib.crc32(payload, crc)
        frames = np.frombuffer(payload, dtype="<f4").reshape(n_t, h, w).copy()
        cases.append(CaseRecord(u0, w0, pitch, frames, (f0, a0)))
    if off + 20 > len(blob):
        raise TruncatedError(f"{path}: missing trailer")
    x_min, x_max, crc_stored = struct.unpack_from("<ddI", blob, off)
    if crc_stored != crc & 0xFFFFFFFF:
        raise ChecksumError(f"{path}: payload CRC mismatch")
    return cases, x_min, x_max


def write_dataset(ds: Dataset, directory) -> dict:
    """Write train/val/test .dlf files; returns the path map."""
    import os
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name in ("train", "val", "test"):
        p = os.path.join(directory, f"{name}.dlf")
        write_dlf(ds.split(name), ds.x_min, ds.x_max, p)
        paths[name] = p
    return paths


def read_dataset(directory) -> Dataset:
    import os
    splits = {}
    x_min = x_max = None
    for name in ("train", "val", "test"):
        cases, lo, hi = read_dlf(os.path.join(directory, f"{name}.dlf"))
        splits[name] = cases
        x_min, x_max = lo, hi
    return Dataset(splits["train"], splits["val"], splits["test"],
                   x_min, x_max)
