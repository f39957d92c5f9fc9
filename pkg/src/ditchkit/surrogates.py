"""Time-marching surrogate models over load patches.

Four architectures share one convolutional encoder (stride-2 SAME convs
with LeakyReLU):

* cjm    encoder -> Dense(latent) -> two LSTMs -> linear Dense(H*W)
* cjmnlb cjm with non-local attention after conv stages 3 and 4
* cjmdd  encoder -> LSTMs -> linear Dense(latent) -> transposed-conv decoder
* kae    slice-concatenating encoder -> linear Dense(latent) -> bias-free
         linear latent map K -> transposed-conv decoder

All consume a sliding window of ``window`` frames and predict the next
frame.  The kae trains on two shifted windows with reconstruction,
prediction and latent-linearity losses; the linearity term is disabled
for the first ``warmup_epochs`` epochs.  An auxiliary "unfilter" CNN
maps blurred frames back to raw ones.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, normalize
from .errors import ConfigError, NumericError, RolloutError
from .nn.checkpoint import load_dkpt, save_dkpt
from .nn.initializers import koopman_rotations
from .nn.layers import (Conv2D, Conv2DTranspose, Dense, LeakyReLU, LSTM,
                        NonLocalBlock, Reshape)
from .nn.optim import ParamStore
from .rng import Rng

ARCHITECTURES = ("cjm", "cjmdd", "cjmnlb", "kae")


@dataclass(frozen=True)
class ModelArch:
    variant: str
    patch: int = 128
    window: int = 3
    latent: int = 10
    filters: tuple = (8, 16, 32, 64)
    lstm_units: int = 100

    def __post_init__(self):
        if self.variant not in ARCHITECTURES + ("unfilter",):
            raise ConfigError(f"unknown architecture {self.variant!r}")
        if self.patch % 16 != 0:
            raise ConfigError("patch size must be divisible by 16")

    @property
    def bottleneck(self) -> int:
        return self.patch // 16

    @property
    def flat_per_slice(self) -> int:
        return self.bottleneck ** 2 * self.filters[-1]


def desk_arch(variant: str, window: int = 3) -> ModelArch:
    """Scaled-down twin for 32x32 patches (same topology)."""
    return ModelArch(variant, patch=32, window=window, latent=10,
                     filters=(4, 8, 16, 32), lstm_units=32)


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 1
    alpha_reconst: float = 1.0
    alpha_predict: float = 1.0
    alpha_linear: float = 0.01
    warmup_epochs: int = 25
    collapse_tol: float = 1e-6


@dataclass
class TrainResult:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)
    latent_std: list = field(default_factory=list)
    collapse_warnings: list = field(default_factory=list)


class _Chain:
    """Sequential run of components sharing the forward/backward protocol."""

    def __init__(self, parts):
        self.parts = list(parts)

    def forward(self, x):
        caches = []
        for p in self.parts:
            x, c = p.forward(x)
            caches.append(c)
        return x, caches

    def backward(self, caches, dy):
        for p, c in zip(reversed(self.parts), reversed(caches)):
            dy = p.backward(c, dy)
        return dy


def _encoder_chain(store, rng, arch: ModelArch, with_nlb: bool) -> _Chain:
    f = arch.filters
    parts = [Conv2D(store, "enc1", 1, f[0], rng, stride=2), LeakyReLU(),
             Conv2D(store, "enc2", f[0], f[1], rng, stride=2), LeakyReLU(),
             Conv2D(store, "enc3", f[1], f[2], rng, stride=2), LeakyReLU()]
    if with_nlb:
        parts.append(NonLocalBlock(store, "nlb3", f[2], rng))
    parts += [Conv2D(store, "enc4", f[2], f[3], rng, stride=2), LeakyReLU()]
    if with_nlb:
        parts.append(NonLocalBlock(store, "nlb4", f[3], rng))
    return _Chain(parts)


def _decoder_chain(store, rng, arch: ModelArch) -> _Chain:
    f = arch.filters
    hw = arch.bottleneck
    return _Chain([
        Dense(store, "dec_fc", arch.latent, arch.flat_per_slice, rng),
        LeakyReLU(),
        Reshape((hw, hw, f[3])),
        Conv2DTranspose(store, "dec_t1", f[3], f[2], rng), LeakyReLU(),
        Conv2DTranspose(store, "dec_t2", f[2], f[1], rng), LeakyReLU(),
        Conv2DTranspose(store, "dec_t3", f[1], f[0], rng), LeakyReLU(),
        Conv2DTranspose(store, "dec_t4", f[0], 1, rng),
        Reshape((arch.patch, arch.patch)),
    ])


def _fold_slices(x):
    b, l = x.shape[0], x.shape[1]
    return x.reshape(b * l, x.shape[2], x.shape[3], 1), (b, l)


class _SurrogateBase:
    def __init__(self, arch: ModelArch, store: ParamStore):
        self.arch = arch
        self.store = store

    @property
    def n_params(self) -> int:
        return self.store.n_params

    def _cast(self, x):
        return np.ascontiguousarray(x, dtype=self.store.dtype)

    def predict(self, window: np.ndarray) -> np.ndarray:
        """One-step prediction from a (window, H, W) stack."""
        out = self.forward(self._cast(window[None]))[0]
        return out[0]

    def loss_and_grads(self, x, y):
        """MSE training step ingredients; grads land in the store."""
        x = self._cast(x)
        y = self._cast(y)
        self.store.zero_grads()
        pred, caches = self.forward(x)
        diff = pred - y
        loss = float(np.mean(diff * diff))
        self.backward(caches, (2.0 / diff.size) * diff)
        return loss

    def eval_loss(self, x, y):
        pred = self.forward(self._cast(x))[0]
        d = pred - self._cast(y)
        return float(np.mean(d * d))


class CjmModel(_SurrogateBase):
    """Conv encoder, two stacked LSTMs, one linear dense head."""

    def __init__(self, arch: ModelArch, rng: Rng, dtype=np.float32):
        store = ParamStore(dtype)
        super().__init__(arch, store)
        self.enc = _encoder_chain(store, rng, arch,
                                  with_nlb=(arch.variant == "cjmnlb"))
        self.fc_enc = Dense(store, "enc_fc", arch.flat_per_slice,
                            arch.latent, rng)
        self.act_enc = LeakyReLU()
        self.lstm1 = LSTM(store, "lstm1", arch.latent, arch.lstm_units, rng,
                          return_sequences=True)
        self.lstm2 = LSTM(store, "lstm2", arch.lstm_units, arch.lstm_units,
                          rng)
        self.fc_out = Dense(store, "head", arch.lstm_units,
                            arch.patch * arch.patch, rng)

    def forward(self, x):
        xs, (b, l) = _fold_slices(x)
        feat, c_enc = self.enc.forward(xs)
        flat = feat.reshape(b * l, -1)
        e, c_fc = self.fc_enc.forward(flat)
        ea, c_act = self.act_enc.forward(e)
        seq = ea.reshape(b, l, self.arch.latent)
        s1, c_l1 = self.lstm1.forward(seq)
        s2, c_l2 = self.lstm2.forward(s1)
        out, c_out = self.fc_out.forward(s2)
        pred = out.reshape(b, self.arch.patch, self.arch.patch)
        return pred, (c_enc, c_fc, c_act, c_l1, c_l2, c_out, feat.shape, b, l)

    def backward(self, caches, dpred):
        c_enc, c_fc, c_act, c_l1, c_l2, c_out, feat_shape, b, l = caches
        dy = dpred.reshape(b, -1)
        ds2 = self.fc_out.backward(c_out, dy)
        ds1 = self.lstm2.backward(c_l2, ds2)
        dseq = self.lstm1.backward(c_l1, ds1)
        dea = dseq.reshape(b * l, self.arch.latent)
        de = self.act_enc.backward(c_act, dea)
        dflat = self.fc_enc.backward(c_fc, de)
        dfeat = dflat.reshape(feat_shape)
        dxs = self.enc.backward(c_enc, dfeat)
        return dxs.reshape(b, l, self.arch.patch, self.arch.patch)


class CjmddModel(_SurrogateBase):
    """Conv encoder, LSTMs, linear latent dense, transposed-conv decoder."""

    def __init__(self, arch: ModelArch, rng: Rng, dtype=np.float32):
        store = ParamStore(dtype)
        super().__init__(arch, store)
        self.enc = _encoder_chain(store, rng, arch, with_nlb=False)
        self.fc_enc = Dense(store, "enc_fc", arch.flat_per_slice,
                            arch.latent, rng)
        self.act_enc = LeakyReLU()
        self.lstm1 = LSTM(store, "lstm1", arch.latent, arch.lstm_units, rng,
                          return_sequences=True)
        self.lstm2 = LSTM(store, "lstm2", arch.lstm_units, arch.lstm_units,
                          rng)
        self.fc_lat = Dense(store, "lat_fc", arch.lstm_units, arch.latent,
                            rng)
        self.dec = _decoder_chain(store, rng, arch)

    def forward(self, x):
        xs, (b, l) = _fold_slices(x)
        feat, c_enc = self.enc.forward(xs)
        flat = feat.reshape(b * l, -1)
        e, c_fc = self.fc_enc.forward(flat)
        ea, c_act = self.act_enc.forward(e)
        seq = ea.reshape(b, l, self.arch.latent)
        s1, c_l1 = self.lstm1.forward(seq)
        s2, c_l2 = self.lstm2.forward(s1)
        z, c_lat = self.fc_lat.forward(s2)
        pred, c_dec = self.dec.forward(z)
        return pred, (c_enc, c_fc, c_act, c_l1, c_l2, c_lat, c_dec,
                      feat.shape, b, l)

    def backward(self, caches, dpred):
        (c_enc, c_fc, c_act, c_l1, c_l2, c_lat, c_dec, feat_shape,
         b, l) = caches
        dz = self.dec.backward(c_dec, dpred)
        ds2 = self.fc_lat.backward(c_lat, dz)
        ds1 = self.lstm2.backward(c_l2, ds2)
        dseq = self.lstm1.backward(c_l1, ds1)
        dea = dseq.reshape(b * l, self.arch.latent)
        de = self.act_enc.backward(c_act, dea)
        dflat = self.fc_enc.backward(c_fc, de)
        dxs = self.enc.backward(c_enc, dflat.reshape(feat_shape))
        return dxs.reshape(b, l, self.arch.patch, self.arch.patch)


class KaeModel(_SurrogateBase):
    """Autoencoder with a bias-free linear map advancing the latent state.

    The encoder flattens the concatenated window slices into one linear
    latent vector; K is initialised as block-diagonal rotations with an
    equidistant unit-circle spectrum.
    """

    def __init__(self, arch: ModelArch, rng: Rng, dtype=np.float32):
        store = ParamStore(dtype)
        super().__init__(arch, store)
        self.enc = _encoder_chain(store, rng, arch, with_nlb=False)
        self.fc_enc = Dense(store, "enc_fc",
                            arch.window * arch.flat_per_slice, arch.latent,
                            rng)
        self.k = Dense(store, "koopman", arch.latent, arch.latent, rng,
                       bias=False,
                       weight_init=koopman_rotations(arch.latent, dtype))
        self.dec = _decoder_chain(store, rng, arch)

    def encode(self, x):
        xs, (b, l) = _fold_slices(self._cast(x))
        feat, c_enc = self.enc.forward(xs)
        flat = feat.reshape(b, -1)
        z, c_fc = self.fc_enc.forward(flat)
        return z, (c_enc, c_fc, feat.shape, b, l)

    def encode_backward(self, cache, dz):
        c_enc, c_fc, feat_shape, b, l = cache
        dflat = self.fc_enc.backward(c_fc, dz)
        dxs = self.enc.backward(c_enc, dflat.reshape(feat_shape))
        return dxs.reshape(b, l, self.arch.patch, self.arch.patch)

    def decode(self, z):
        return self.dec.forward(z)

    def forward(self, x):
        """Window -> next frame: decode(K encode(window))."""
        z, c_enc = self.encode(x)
        zk, c_k = self.k.forward(z)
        pred, c_dec = self.decode(zk)
        return pred, (c_enc, c_k, c_dec)

    def backward(self, caches, dpred):
        c_enc, c_k, c_dec = caches
        dzk = self.dec.backward(c_dec, dpred)
        dz = self.k.backward(c_k, dzk)
        return self.encode_backward(c_enc, dz)

    def loss_terms(self, w1, cfg: TrainConfig, linear_on: bool):
        """Three-term loss on an augmented (B, window+1, H, W) batch.

        w1[:, :window] is the input window, w1[:, window] the next frame;
        the shifted window for the linearity term is w1[:, 1:window+1].
        """
        l = self.arch.window
        x1 = self._cast(w1[:, :l])
        x_t = self._cast(w1[:, l - 1])
        x_tp1 = self._cast(w1[:, l])
        self.store.zero_grads()

        z1, c_enc1 = self.encode(x1)
        rec, c_dec_r = self.decode(z1)
        zk, c_k = self.k.forward(z1)
        pred, c_dec_p = self.decode(zk)

        d_rec = rec - x_t
        d_pred = pred - x_tp1
        loss_r = float(np.mean(d_rec * d_rec))
        loss_p = float(np.mean(d_pred * d_pred))
        loss_l = 0.0

        dzk = self.dec.backward(
            c_dec_p, (cfg.alpha_predict * 2.0 / d_pred.size) * d_pred)
        dz1 = self.dec.backward(
            c_dec_r, (cfg.alpha_reconst * 2.0 / d_rec.size) * d_rec)

        if linear_on:
            x2 = self._cast(w1[:, 1:l + 1])
            z2, c_enc2 = self.encode(x2)
            d_lin = zk - z2
            loss_l = float(np.mean(d_lin * d_lin))
            scale = cfg.alpha_linear * 2.0 / d_lin.size
            dzk = dzk + scale * d_lin
            self.encode_backward(c_enc2, -scale * d_lin)

        dz1 = dz1 + self.k.backward(c_k, dzk)
        self.encode_backward(c_enc1, dz1)
        total = (cfg.alpha_reconst * loss_r + cfg.alpha_predict * loss_p
                 + cfg.alpha_linear * (loss_l if linear_on else 0.0))
        return total, loss_r, loss_p, loss_l

    def latent_std(self, windows) -> float:
        z, _ = self.encode(windows)
        return float(np.mean(np.std(z, axis=0)))


class UnfilterCnn(_SurrogateBase):
    """Stride-1 CNN mapping blurred frames back to raw frames."""

    def __init__(self, rng: Rng, patch: int = 128,
                 filters=(16, 32, 64), dtype=np.float32):
        store = ParamStore(dtype)
        arch = ModelArch("unfilter", patch=patch)
        super().__init__(arch, store)
        parts = []
        c_in = 1
        for i, f in enumerate(filters):
            parts += [Conv2D(store, f"uf{i + 1}", c_in, f, rng, stride=1),
                      LeakyReLU()]
            c_in = f
        parts.append(Conv2D(store, f"uf{len(filters) + 1}", c_in, 1, rng,
                            stride=1))
        parts.append(Reshape((patch, patch)))
        self.chain = _Chain(parts)

    def forward(self, x):
        if x.ndim == 3:
            x = x[..., None]
        return self.chain.forward(x)

    def backward(self, caches, dpred):
        return self.chain.backward(caches, dpred)

    def predict(self, frame: np.ndarray) -> np.ndarray:
        return self.forward(self._cast(frame[None]))[0][0]


_MODEL_CLASSES = {"cjm": CjmModel, "cjmnlb": CjmModel, "cjmdd": CjmddModel,
                  "kae": KaeModel}


def build_model(arch: ModelArch, seed: int = 1, dtype=np.float32):
    """Seeded model construction (same seed, same initial weights)."""
    rng = Rng(seed).child(0)
    if arch.variant == "unfilter":
        return UnfilterCnn(rng, patch=arch.patch, dtype=dtype)
    return _MODEL_CLASSES[arch.variant](arch, rng, dtype=dtype)


def count_parameters(arch: ModelArch) -> int:
    return build_model(arch, seed=0).n_params


def make_windows(cases_frames: list, window: int) -> np.ndarray:
    """(N, window+1, H, W) sliding windows over all cases.

    A case with n_t frames yields n_t - window samples; the extra slice
    holds the target frame (and feeds the shifted window of the kae).
    """
    out = []
    for frames in cases_frames:
        n_t = frames.shape[0]
        for a in range(n_t - window):
            out.append(frames[a:a + window + 1])
    if not out:
        raise ConfigError("no training windows: cases shorter than window+1")
    return np.stack(out)


def normalized_cases(ds: Dataset, split: str) -> list:
    return [normalize(rec.frames, ds.x_min, ds.x_max).astype(np.float32)
            for rec in ds.split(split)]


def train(model, ds: Dataset, cfg: TrainConfig) -> TrainResult:
    """Minibatch Adam training with per-epoch seeded shuffling."""
    win = model.arch.window
    train_w = make_windows(normalized_cases(ds, "train"), win)
    val_w = make_windows(normalized_cases(ds, "val"), win) \
        if ds.val else None
    rng = Rng(cfg.seed).child(1)
    result = TrainResult()
    is_kae = isinstance(model, KaeModel)
    n = train_w.shape[0]
    probe = None
    if is_kae and val_w is not None:
        probe = val_w[:min(64, val_w.shape[0]), :win]

    for epoch in range(1, cfg.epochs + 1):
        tic = time.perf_counter()
        order = rng.permutation(n)
        linear_on = is_kae and epoch > cfg.warmup_epochs
        total, seen = 0.0, 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            batch = train_w[idx]
            if is_kae:
                loss, *_ = model.loss_terms(batch, cfg, linear_on)
            else:
                loss = model.loss_and_grads(batch[:, :win], batch[:, win])
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}")
            model.store.adam_step(lr=cfg.lr)
            total += loss * len(idx)
            seen += len(idx)
        result.train_loss.append(total / seen)

        if val_w is not None:
            result.val_loss.append(
                model.eval_loss(val_w[:, :win], val_w[:, win]))
        if is_kae and probe is not None and epoch > cfg.warmup_epochs:
            std = model.latent_std(probe)
            result.latent_std.append(std)
            if std < cfg.collapse_tol:
                msg = (f"latent collapse: std {std:.3e} below "
                       f"{cfg.collapse_tol:.1e} at epoch {epoch}")
                result.collapse_warnings.append(msg)
                warnings.warn(msg)
        result.epoch_seconds.append(time.perf_counter() - tic)
    return result


def rollout(model, start: np.ndarray, n_steps: int) -> np.ndarray:
    """Autoregressive rollout from a (window, H, W) start stack.

    Every prediction is fed back as the newest slice.  The kae variant
    re-encodes the updated window each step.
    """
    win = list(np.asarray(start, dtype=np.float32))
    if len(win) != model.arch.window:
        raise ConfigError(f"rollout start needs {model.arch.window} frames")
    p = model.arch.patch
    out = np.zeros((n_steps, p, p), dtype=np.float32)
    for j in range(n_steps):
        pred = model.predict(np.stack(win))
        if not np.all(np.isfinite(pred)):
            raise RolloutError(f"non-finite rollout frame at step {j}",
                               step=j)
        out[j] = pred
        win.pop(0)
        win.append(pred)
    return out


def kae_latent_rollout(model: KaeModel, start: np.ndarray,
                       n_steps: int) -> np.ndarray:
    """Encode once, advance only in latent space, decode every state."""
    z, _ = model.encode(np.asarray(start, dtype=np.float32)[None])
    p = model.arch.patch
    out = np.zeros((n_steps, p, p), dtype=np.float32)
    for j in range(n_steps):
        z = z @ model.k.w
        frame, _ = model.decode(z)
        if not np.all(np.isfinite(frame)):
            raise RolloutError(f"non-finite latent rollout at step {j}",
                               step=j)
        out[j] = frame[0]
    return out


def train_unfilter(blurred: np.ndarray, raw: np.ndarray, seed: int = 1,
                   epochs: int = 50, batch_size: int = 64,
                   lr: float = 1e-3, patch: int | None = None) -> tuple:
    """Train the unfilter CNN on (blurred, raw) frame pairs."""
    patch = patch or blurred.shape[1]
    model = UnfilterCnn(Rng(seed).child(0), patch=patch)
    rng = Rng(seed).child(1)
    n = blurred.shape[0]
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            loss = model.loss_and_grads(blurred[idx], raw[idx])
            model.store.adam_step(lr=lr)
            total += loss * len(idx)
        losses.append(total / n)
    return model, losses


def save_model(model, path, extra_meta: dict | None = None) -> None:
    meta = {"variant": model.arch.variant, "patch": model.arch.patch,
            "window": model.arch.window, "latent": model.arch.latent,
            "filters": list(model.arch.filters),
            "lstm_units": model.arch.lstm_units}
    if extra_meta:
        meta.update(extra_meta)
    save_dkpt(model.store.state_arrays(), path, meta=meta)


def load_model(path):
    arrays, meta = load_dkpt(path)
    if not meta:
        raise ConfigError(f"{path}: missing architecture sidecar")
    arch = ModelArch(meta["variant"], patch=meta["patch"],
                     window=meta["window"], latent=meta["latent"],
                     filters=tuple(meta["filters"]),
                     lstm_units=meta["lstm_units"])
    model = build_model(arch, seed=0)
    model.store.load_arrays(arrays)
    return model, meta
