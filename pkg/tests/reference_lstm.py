"""Loop-based scalar reference for the LSTM forward pass.

Deliberately written with plain Python floats and math functions, no
numpy and no imports from the package, so it stays an independent oracle
for the vectorized kernels.
"""

import math


def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def lstm_layer_scalar(seq, wx, wh, b):
    """One layer over one sequence. seq: list of lists (T x D); wx: 4H x D;
    wh: 4H x H; b: length 4H. Gate order: input, forget, cell, output.
    Returns the list of hidden vectors per step."""
    hsz = len(wh[0])
    h = [0.0] * hsz
    c = [0.0] * hsz
    outs = []
    for x_t in seq:
        a = []
        for r in range(4 * hsz):
            total = b[r]
            for k, xv in enumerate(x_t):
                total += wx[r][k] * xv
            for k in range(hsz):
                total += wh[r][k] * h[k]
            a.append(total)
        new_h, new_c = [], []
        for k in range(hsz):
            i = _sigmoid(a[k])
            f = _sigmoid(a[hsz + k])
            g = math.tanh(a[2 * hsz + k])
            o = _sigmoid(a[3 * hsz + k])
            cc = f * c[k] + i * g
            new_c.append(cc)
            new_h.append(o * math.tanh(cc))
        h, c = new_h, new_c
        outs.append(list(h))
    return outs


def model_forward_scalar(layers, w_out, b_out, seq):
    """Stacked layers then output projection of the last hidden state.
    layers: list of (wx, wh, b) nested lists. Returns the prediction list."""
    cur = [list(x) for x in seq]
    for wx, wh, b in layers:
        cur = lstm_layer_scalar(cur, wx, wh, b)
    last = cur[-1]
    return [sum(w_out[m][k] * last[k] for k in range(len(last))) + b_out[m]
            for m in range(len(b_out))]
