"""Pure-numpy implementations of the recurrent hot loops.

These define the reference semantics; the numba backend implements the
same formulas and must agree to floating-point noise. Gate order along
the 4H axis is fixed: input, forget, cell-candidate, output. All arrays
are float64.
"""

import numpy as np


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_layer_forward(x, wx, wh, b):
    """Run one LSTM layer over a batch of sequences.

    x: (B, T, D) inputs; wx: (4H, D); wh: (4H, H); b: (4H,).
    Initial hidden and cell states are zero.

    Returns (h, c, gates): hidden and cell sequences of shape (B, T, H)
    and post-activation gate values of shape (B, T, 4H).
    """
    B, T, _ = x.shape
    H = wh.shape[1]
    h = np.empty((B, T, H))
    c = np.empty((B, T, H))
    gates = np.empty((B, T, 4 * H))
    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    wxT = wx.T
    whT = wh.T
    for t in range(T):
        a = x[:, t] @ wxT + h_prev @ whT + b
        i = sigmoid(a[:, :H])
        f = sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = sigmoid(a[:, 3 * H:])
        c_prev = f * c_prev + i * g
        h_prev = o * np.tanh(c_prev)
        gates[:, t, :H] = i
        gates[:, t, H:2 * H] = f
        gates[:, t, 2 * H:3 * H] = g
        gates[:, t, 3 * H:] = o
        c[:, t] = c_prev
        h[:, t] = h_prev
    return h, c, gates


def lstm_layer_backward(x, h, c, gates, wx, wh, dh_out):
    """Exact reverse-mode gradients through one LSTM layer.

    Arguments mirror the forward cache; dh_out is the upstream gradient
    on the hidden sequence, shape (B, T, H). Parameter gradients are
    summed over the batch.

    Returns (dx, dwx, dwh, db).
    """
    B, T, D = x.shape
    H = wh.shape[1]
    dwx = np.zeros((4 * H, D))
    dwh = np.zeros((4 * H, H))
    db = np.zeros(4 * H)
    dx = np.empty((B, T, D))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    zeros = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H:2 * H]
        g = gates[:, t, 2 * H:3 * H]
        o = gates[:, t, 3 * H:]
        c_prev = c[:, t - 1] if t > 0 else zeros
        h_prev = h[:, t - 1] if t > 0 else zeros
        tc = np.tanh(c[:, t])
        dh = dh_out[:, t] + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da = np.empty((B, 4 * H))
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dc * i * (1.0 - g * g)
        da[:, 3 * H:] = do * o * (1.0 - o)
        dwx += da.T @ x[:, t]
        dwh += da.T @ h_prev
        db += da.sum(axis=0)
        dx[:, t] = da @ wx
        dh_next = da @ wh
        dc_next = dc * f
    return dx, dwx, dwh, db
