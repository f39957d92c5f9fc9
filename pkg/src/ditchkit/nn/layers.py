"""Layer set with hand-written forward/backward passes.

Every component follows one calling convention:

    y, cache = layer.forward(x)
    dx = layer.backward(cache, dy)

``backward`` accumulates parameter gradients into the shared
:class:`ParamStore`; layers may be applied several times per step (e.g.
a shared encoder), each call carrying its own cache.  Arrays are
channels-last.  Convolutions use SAME padding: for input sizes divisible
by the stride the total pad is max(kernel - stride, 0), split with the
smaller part first.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .initializers import glorot_uniform, lstm_bias, orthogonal
from .optim import ParamStore


def leaky_relu(x: np.ndarray, alpha: float = 0.01) -> np.ndarray:
    return np.where(x >= 0, x, alpha * x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Shift-invariant softmax along ``axis``."""
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


class LeakyReLU:
    def __init__(self, alpha: float = 0.01):
        self.alpha = alpha

    def forward(self, x):
        y = leaky_relu(x, self.alpha)
        return y, x >= 0

    def backward(self, cache, dy):
        return np.where(cache, dy, self.alpha * dy)


class Flatten:
    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache)


class Reshape:
    def __init__(self, shape):
        self.shape = tuple(shape)

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache)


class Dense:
    """y = x W + b with W of shape (n_in, n_out)."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 rng, bias: bool = True, weight_init=None):
        self.store = store
        self.name = name
        if weight_init is None:
            weight_init = glorot_uniform((n_in, n_out), n_in, n_out, rng,
                                         store.dtype)
        self.w = store.add(f"{name}/kernel", weight_init)
        self.b = store.add(f"{name}/bias",
                           np.zeros(n_out)) if bias else None

    def forward(self, x):
        y = x @ self.w
        if self.b is not None:
            y = y + self.b
        return y, x

    def backward(self, cache, dy):
        x = cache
        self.store.accumulate(f"{self.name}/kernel", x.T @ dy)
        if self.b is not None:
            self.store.accumulate(f"{self.name}/bias", dy.sum(axis=0))
        return dy @ self.w.T


def _same_geometry(size: int, k: int, s: int):
    out = -(-size // s)
    total = max((out - 1) * s + k - size, 0)
    return out, total // 2, total - total // 2


def _conv_fwd(xp: np.ndarray, w: np.ndarray, stride: int, oh: int, ow: int):
    """Padded input (B, Hp, Wp, Cin) -> (B, oh, ow, F), kernel loop."""
    k = w.shape[0]
    b = xp.shape[0]
    y = np.zeros((b, oh, ow, w.shape[3]), dtype=xp.dtype)
    for di in range(k):
        for dj in range(k):
            xs = xp[:, di:di + (oh - 1) * stride + 1:stride,
                    dj:dj + (ow - 1) * stride + 1:stride, :]
            y += xs @ w[di, dj]
    return y


def _conv_dw(xp: np.ndarray, dy: np.ndarray, k: int, stride: int):
    oh, ow = dy.shape[1], dy.shape[2]
    dw = np.zeros((k, k, xp.shape[3], dy.shape[3]), dtype=xp.dtype)
    for di in range(k):
        for dj in range(k):
            xs = xp[:, di:di + (oh - 1) * stride + 1:stride,
                    dj:dj + (ow - 1) * stride + 1:stride, :]
            dw[di, dj] = np.tensordot(xs, dy, axes=([0, 1, 2], [0, 1, 2]))
    return dw


def _conv_dx(dy: np.ndarray, w: np.ndarray, stride: int, padded_shape):
    """Scatter the output grad back onto the padded input grid."""
    k = w.shape[0]
    oh, ow = dy.shape[1], dy.shape[2]
    dxp = np.zeros(padded_shape, dtype=dy.dtype)
    for di in range(k):
        for dj in range(k):
            dxp[:, di:di + (oh - 1) * stride + 1:stride,
                dj:dj + (ow - 1) * stride + 1:stride, :] += dy @ w[di, dj].T
    return dxp


class Conv2D:
    """SAME-padded strided convolution, kernel (k, k, c_in, filters)."""

    def __init__(self, store: ParamStore, name: str, c_in: int, filters: int,
                 rng, k: int = 3, stride: int = 1):
        self.store = store
        self.name = name
        self.k, self.stride = k, stride
        fan = k * k
        self.w = store.add(f"{name}/kernel",
                           glorot_uniform((k, k, c_in, filters),
                                          fan * c_in, fan * filters, rng,
                                          store.dtype))
        self.b = store.add(f"{name}/bias", np.zeros(filters))

    def forward(self, x):
        b, h, wd, _ = x.shape
        oh, pt, pb = _same_geometry(h, self.k, self.stride)
        ow, pl, pr = _same_geometry(wd, self.k, self.stride)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        y = _conv_fwd(xp, self.w, self.stride, oh, ow) + self.b
        return y, (xp, x.shape, (pt, pl))

    def backward(self, cache, dy):
        xp, x_shape, (pt, pl) = cache
        self.store.accumulate(f"{self.name}/kernel",
                              _conv_dw(xp, dy, self.k, self.stride))
        self.store.accumulate(f"{self.name}/bias", dy.sum(axis=(0, 1, 2)))
        dxp = _conv_dx(dy, self.w, self.stride, xp.shape)
        return dxp[:, pt:pt + x_shape[1], pl:pl + x_shape[2], :]


class Conv2DTranspose:
    """Adjoint of the SAME strided convolution; output is input * stride.

    The kernel is stored as (k, k, filters, c_in): the layer is exactly
    the transpose of a Conv2D mapping (H*s, W*s, filters) down to
    (H, W, c_in) with the same padding geometry.
    """

    def __init__(self, store: ParamStore, name: str, c_in: int, filters: int,
                 rng, k: int = 3, stride: int = 2):
        self.store = store
        self.name = name
        self.k, self.stride = k, stride
        fan = k * k
        self.w = store.add(f"{name}/kernel",
                           glorot_uniform((k, k, filters, c_in),
                                          fan * c_in, fan * filters, rng,
                                          store.dtype))
        self.b = store.add(f"{name}/bias", np.zeros(filters))

    def _geometry(self, h, wd):
        hs, ws = h * self.stride, wd * self.stride
        _, pt, pb = _same_geometry(hs, self.k, self.stride)
        _, pl, pr = _same_geometry(ws, self.k, self.stride)
        return hs, ws, pt, pb, pl, pr

    def forward(self, x):
        b, h, wd, _ = x.shape
        hs, ws, pt, pb, pl, pr = self._geometry(h, wd)
        padded = (b, hs + pt + pb, ws + pl + pr, self.w.shape[2])
        yp = _conv_dx(x, self.w, self.stride, padded)
        y = yp[:, pt:pt + hs, pl:pl + ws, :] + self.b
        return y, (x, (h, wd))

    def backward(self, cache, dy):
        x, (h, wd) = cache
        hs, ws, pt, pb, pl, pr = self._geometry(h, wd)
        dyp = np.pad(dy, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        self.store.accumulate(f"{self.name}/bias", dy.sum(axis=(0, 1, 2)))
        self.store.accumulate(f"{self.name}/kernel",
                              _conv_dw(dyp, x, self.k, self.stride))
        return _conv_fwd(dyp, self.w, self.stride, h, wd)


class LSTM:
    """Standard LSTM with one 4n bias, gate order (i, f, g, o).

    Parameters: input kernel (m, 4n) Glorot, recurrent kernel (n, 4n)
    orthogonal, bias zeros with the forget block at one.  Total count
    4n (m + n + 1).
    """

    def __init__(self, store: ParamStore, name: str, n_in: int, units: int,
                 rng, return_sequences: bool = False):
        self.store = store
        self.name = name
        self.n = units
        self.return_sequences = return_sequences
        self.wx = store.add(f"{name}/kernel",
                            glorot_uniform((n_in, 4 * units), n_in, 4 * units,
                                           rng, store.dtype))
        self.wh = store.add(f"{name}/recurrent",
                            orthogonal(units, 4 * units, rng, store.dtype))
        self.b = store.add(f"{name}/bias", lstm_bias(units, store.dtype))

    def forward(self, x):
        b, t, _ = x.shape
        n = self.n
        h = np.zeros((b, n), dtype=x.dtype)
        c = np.zeros((b, n), dtype=x.dtype)
        hs = np.zeros((b, t, n), dtype=x.dtype)
        steps = []
        for i in range(t):
            a = x[:, i] @ self.wx + h @ self.wh + self.b
            ig = sigmoid(a[:, :n])
            fg = sigmoid(a[:, n:2 * n])
            gg = np.tanh(a[:, 2 * n:3 * n])
            og = sigmoid(a[:, 3 * n:])
            c_new = fg * c + ig * gg
            tc = np.tanh(c_new)
            h_new = og * tc
            steps.append((x[:, i], h, c, ig, fg, gg, og, tc))
            h, c = h_new, c_new
            hs[:, i] = h
        y = hs if self.return_sequences else h
        return y, (steps, x.shape)

    def backward(self, cache, dy):
        steps, x_shape = cache
        b, t, m = x_shape
        n = self.n
        dx = np.zeros(x_shape, dtype=dy.dtype)
        dwx = np.zeros_like(self.wx)
        dwh = np.zeros_like(self.wh)
        db = np.zeros_like(self.b)
        dh = np.zeros((b, n), dtype=dy.dtype)
        dc = np.zeros((b, n), dtype=dy.dtype)
        if not self.return_sequences:
            dh = dh + dy
        for i in range(t - 1, -1, -1):
            if self.return_sequences:
                dh = dh + dy[:, i]
            x_t, h_prev, c_prev, ig, fg, gg, og, tc = steps[i]
            dog = dh * tc
            dc = dc + dh * og * (1.0 - tc * tc)
            dig = dc * gg
            dfg = dc * c_prev
            dgg = dc * ig
            dc = dc * fg
            da = np.concatenate([dig * ig * (1.0 - ig),
                                 dfg * fg * (1.0 - fg),
                                 dgg * (1.0 - gg * gg),
                                 dog * og * (1.0 - og)], axis=1)
            dwx += x_t.T @ da
            dwh += h_prev.T @ da
            db += da.sum(axis=0)
            dx[:, i] = da @ self.wx.T
            dh = da @ self.wh.T
        self.store.accumulate(f"{self.name}/kernel", dwx)
        self.store.accumulate(f"{self.name}/recurrent", dwh)
        self.store.accumulate(f"{self.name}/bias", db)
        return dx


class NonLocalBlock:
    """Self-attention over the spatial positions of a feature map.

    theta, phi and g are bias-free 1x1 convolutions to C/2 channels,
    y = softmax(theta phi^T) g row-wise, and the output is w(y) + x with
    w a bias-free 1x1 convolution back to C channels.
    """

    def __init__(self, store: ParamStore, name: str, channels: int, rng):
        if channels % 2 != 0:
            raise ConfigError(f"non-local block needs an even channel count, "
                              f"got {channels}")
        self.store = store
        self.name = name
        c, c2 = channels, channels // 2
        mk = lambda key: store.add(f"{name}/{key}",
                                   glorot_uniform((c, c2), c, c2, rng,
                                                  store.dtype))
        self.wt, self.wp, self.wg = mk("theta"), mk("phi"), mk("g")
        self.ww = store.add(f"{name}/w",
                            glorot_uniform((c2, c), c2, c, rng, store.dtype))

    def forward(self, x):
        b, h, wd, c = x.shape
        flat = x.reshape(b, h * wd, c)
        th = flat @ self.wt
        ph = flat @ self.wp
        gg = flat @ self.wg
        att = softmax(th @ np.swapaxes(ph, 1, 2), axis=-1)
        y = att @ gg
        z = y @ self.ww + flat
        return z.reshape(x.shape), (flat, th, ph, gg, att, y, x.shape)

    def backward(self, cache, dy):
        flat, th, ph, gg, att, y, x_shape = cache
        b, h, wd, c = x_shape
        dz = dy.reshape(b, h * wd, c)
        self.store.accumulate(f"{self.name}/w",
                              np.tensordot(y, dz, axes=([0, 1], [0, 1])))
        dyy = dz @ self.ww.T
        datt = dyy @ np.swapaxes(gg, 1, 2)
        dgg = np.swapaxes(att, 1, 2) @ dyy
        ds = (datt - np.sum(datt * att, axis=-1, keepdims=True)) * att
        dth = ds @ ph
        dph = np.swapaxes(ds, 1, 2) @ th
        acc = lambda key, a, g: self.store.accumulate(
            f"{self.name}/{key}", np.tensordot(a, g, axes=([0, 1], [0, 1])))
        acc("theta", flat, dth)
        acc("phi", flat, dph)
        acc("g", flat, dgg)
        dflat = dz + dth @ self.wt.T + dph @ self.wp.T + dgg @ self.wg.T
        return dflat.reshape(x_shape)
