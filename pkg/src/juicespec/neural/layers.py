"""Forward/backward kernels for the layer types used by the networks.

Every ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache and returns the input gradient
followed by parameter gradients.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# -- dense ------------------------------------------------------------------


def dense_forward(x, W, b):
    """x (B, in), W (in, out), b (out,)."""
    return x @ W + b, x


def dense_backward(dy, x, W):
    return dy @ W.T, x.T @ dy, dy.sum(axis=0)


def relu_forward(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dy, mask):
    return dy * mask


# -- 1-D convolution over a single-channel sequence ---------------------------


def conv1d_forward(x, W, b):
    """Valid cross-correlation: x (B, L), W (k, F), b (F,) -> (B, L-k+1, F)."""
    k = W.shape[0]
    windows = sliding_window_view(x, k, axis=1)  # (B, L', k)
    return windows @ W + b, (windows, x.shape[1])


def conv1d_backward(dy, cache, W):
    windows, length = cache
    k = W.shape[0]
    dW = np.einsum("blk,blf->kf", windows, dy)
    db = dy.sum(axis=(0, 1))
    dwin = dy @ W.T  # (B, L', k)
    L_out = dwin.shape[1]
    dx = np.zeros((dy.shape[0], length))
    for j in range(k):
        dx[:, j:j + L_out] += dwin[:, :, j]
    return dx, dW, db


def maxpool_forward(x, size: int):
    """Non-overlapping max pool along axis 1 of (B, L, F); a ragged tail is dropped."""
    B, L, F = x.shape
    L_out = L // size
    blocks = x[:, :L_out * size].reshape(B, L_out, size, F)
    arg = blocks.argmax(axis=2)  # first max wins ties
    out = np.take_along_axis(blocks, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return out, (arg, x.shape, size)


def maxpool_backward(dy, cache):
    arg, shape, size = cache
    B, L, F = shape
    L_out = dy.shape[1]
    dblocks = np.zeros((B, L_out, size, F))
    np.put_along_axis(dblocks, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = np.zeros(shape)
    dx[:, :L_out * size] = dblocks.reshape(B, L_out * size, F)
    return dx


# -- LSTM ---------------------------------------------------------------------


def _gate_affine(H: int):
    # sigmoid(a) = 0.5 * tanh(0.5 * a) + 0.5, so one tanh call covers all four gates
    scale = np.full(4 * H, 0.5)
    scale[2 * H:3 * H] = 1.0
    offset = np.full(4 * H, 0.5)
    offset[2 * H:3 * H] = 0.0
    return scale, offset


def lstm_forward(x, Wx, Wh, b):
    """Unidirectional LSTM; returns the final hidden state.

    x (B, T, D); Wx (D, 4H); Wh (H, 4H); b (4H,). Gate blocks are ordered
    input, forget, candidate, output.
    """
    B, T, _ = x.shape
    H = Wh.shape[0]
    proj = np.ascontiguousarray((x @ Wx + b).transpose(1, 0, 2))  # (T, B, 4H)
    scale, offset = _gate_affine(H)
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, 4 * H))
    tcs = np.empty((T, B, H))
    for t in range(T):
        gt = gates[t]
        np.tanh((proj[t] + hs[t] @ Wh) * scale, out=gt)
        gt *= scale
        gt += offset
        c = cs[t + 1]
        np.multiply(gt[:, H:2 * H], cs[t], out=c)
        c += gt[:, :H] * gt[:, 2 * H:3 * H]
        np.tanh(c, out=tcs[t])
        np.multiply(gt[:, 3 * H:], tcs[t], out=hs[t + 1])
    # local gate derivatives, vectorized over time: s(1-s) for sigmoids, 1-g^2 for tanh
    deriv = gates * (1.0 - gates)
    deriv[:, :, 2 * H:3 * H] = 1.0 - gates[:, :, 2 * H:3 * H] ** 2
    return hs[T], (x, hs, cs, gates, tcs, deriv)


def lstm_hidden_states(x, Wx, Wh, b) -> np.ndarray:
    """Full hidden trajectory (T, B, H), for inspection."""
    _, cache = lstm_forward(x, Wx, Wh, b)
    return cache[1][1:]


def lstm_backward(dh_last, cache, Wx, Wh):
    x, hs, cs, gates, tcs, deriv = cache
    T, B, H4 = gates.shape
    H = H4 // 4
    dtc = 1.0 - tcs * tcs
    da_all = np.empty((T, B, H4))
    WhT = Wh.T
    dh = dh_last
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        gt = gates[t]
        dc = dc + dh * gt[:, 3 * H:] * dtc[t]
        da = da_all[t]
        np.multiply(dc, gt[:, 2 * H:3 * H], out=da[:, :H])
        np.multiply(dc, cs[t], out=da[:, H:2 * H])
        np.multiply(dc, gt[:, :H], out=da[:, 2 * H:3 * H])
        np.multiply(dh, tcs[t], out=da[:, 3 * H:])
        da *= deriv[t]
        dh = da @ WhT
        dc = dc * gt[:, H:2 * H]
    flat = da_all.reshape(T * B, H4)
    dWh = hs[:-1].reshape(T * B, H).T @ flat
    dWx = np.einsum("btd,tbk->dk", x, da_all)
    db = flat.sum(axis=0)
    dx = (da_all @ Wx.T).transpose(1, 0, 2)
    return dx, dWx, dWh, db
