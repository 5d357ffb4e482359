"""Pure-Python training/inference kernels.

This is the fallback backend and the reference for the compiled one in
ckernels.pyx. The two must stay bit-for-bit interchangeable on the same
platform, which pins down more than the math: the *order* of every float
accumulation below is part of the contract. Loops sum in ascending index
order, softmax subtracts the running row max, and the per-epoch shuffle is
a Fisher-Yates driven by an inline splitmix64. Change anything here and
the mirror in ckernels.pyx needs the same change (test_kernels.py checks).

Weight layout: layer l maps widths[l] inputs to widths[l+1] outputs and is
stored row-major as (out, in). Hidden layers apply the activation; the last
layer feeds a row softmax.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

ACT_RELU = 0
ACT_TANH = 1

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates permutation of range(n) from a raw splitmix64 stream."""
    perm = list(range(n))
    state = seed & _MASK
    for i in range(n - 1, 0, -1):
        state = (state + _GOLDEN) & _MASK
        j = _mix(state) % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def _forward_rows(w_lists, b_lists, rows, activation):
    """Forward pass over a list of sample rows.

    Returns (acts, probs): acts[l] is the input to layer l (acts[0] is the
    batch itself), probs the softmax output rows.
    """
    n_layers = len(w_lists)
    acts = [rows]
    cur = rows
    for layer in range(n_layers):
        w = w_lists[layer]
        b = b_lists[layer]
        last = layer == n_layers - 1
        out = []
        for row in cur:
            orow = []
            for wr, br in zip(w, b):
                acc = br
                for wk, xk in zip(wr, row):
                    acc += wk * xk
                if not last:
                    if activation == ACT_RELU:
                        acc = acc if acc > 0.0 else 0.0
                    else:
                        acc = math.tanh(acc)
                orow.append(acc)
            out.append(orow)
        if last:
            probs = []
            for orow in out:
                mx = orow[0]
                for v in orow:
                    if v > mx:
                        mx = v
                s = 0.0
                erow = []
                for v in orow:
                    e = math.exp(v - mx)
                    erow.append(e)
                    s += e
                probs.append([e / s for e in erow])
            return acts, probs
        acts.append(out)
        cur = out
    raise AssertionError("network must have at least one layer")


def _batch_loss(probs, yb):
    """Mean negative log-probability of the true class; inf marks divergence."""
    acc = 0.0
    for i, y in enumerate(yb):
        p = probs[i][y]
        if p > 0.0:
            acc += -math.log(p)
        else:
            acc = math.inf
            break
    return acc / len(yb)


def _backward_rows(w_lists, acts, probs, yb, activation, want_input_grad):
    """Gradients of the mean cross-entropy over the batch.

    Returns (gw_lists, gb_lists, input_grad-or-None). Accumulation order
    (samples outer, then units) is part of the cross-backend contract.
    """
    n_layers = len(w_lists)
    nb = len(yb)
    m = len(probs[0])
    dz = [
        [(probs[i][c] - (1.0 if c == yb[i] else 0.0)) / nb for c in range(m)]
        for i in range(nb)
    ]
    gw_lists = [None] * n_layers
    gb_lists = [None] * n_layers
    input_grad = None
    for layer in range(n_layers - 1, -1, -1):
        w = w_lists[layer]
        a_in = acts[layer]
        outw = len(w)
        inw = len(w[0])
        gw = [[0.0] * inw for _ in range(outw)]
        gb = [0.0] * outw
        for i in range(nb):
            dzi = dz[i]
            ai = a_in[i]
            for r in range(outw):
                d = dzi[r]
                gb[r] += d
                gwr = gw[r]
                for k in range(inw):
                    gwr[k] += d * ai[k]
        gw_lists[layer] = gw
        gb_lists[layer] = gb
        if layer > 0 or want_input_grad:
            da = []
            for i in range(nb):
                dzi = dz[i]
                darow = []
                for k in range(inw):
                    acc = 0.0
                    for r in range(outw):
                        acc += dzi[r] * w[r][k]
                    darow.append(acc)
                da.append(darow)
            if layer > 0:
                new_dz = []
                for i in range(nb):
                    ai = a_in[i]
                    row = []
                    for k in range(inw):
                        a = ai[k]
                        if activation == ACT_RELU:
                            row.append(da[i][k] if a > 0.0 else 0.0)
                        else:
                            row.append(da[i][k] * (1.0 - a * a))
                    new_dz.append(row)
                dz = new_dz
            else:
                input_grad = da
    return gw_lists, gb_lists, input_grad


def forward(weights, biases, x, activation: int) -> np.ndarray:
    """Class probabilities for every row of x. Shapes: x (n, d) -> (n, m)."""
    w_lists = [w.tolist() for w in weights]
    b_lists = [b.tolist() for b in biases]
    _, probs = _forward_rows(w_lists, b_lists, x.tolist(), activation)
    return np.array(probs, dtype=np.float64)


def backward(weights, biases, x, y, activation: int, want_input_grad: bool = True):
    """Gradients of the mean cross-entropy w.r.t. weights, biases, inputs."""
    w_lists = [w.tolist() for w in weights]
    b_lists = [b.tolist() for b in biases]
    acts, probs = _forward_rows(w_lists, b_lists, x.tolist(), activation)
    yb = [int(v) for v in y]
    gw_lists, gb_lists, input_grad = _backward_rows(
        w_lists, acts, probs, yb, activation, want_input_grad
    )
    gws = [np.array(g, dtype=np.float64) for g in gw_lists]
    gbs = [np.array(g, dtype=np.float64) for g in gb_lists]
    gx = None if input_grad is None else np.array(input_grad, dtype=np.float64)
    return gws, gbs, gx


def train_sgd(weights, biases, x, y, activation, epoch_seeds, batch_size, lr):
    """Mini-batch SGD, mutating weights/biases in place.

    epoch_seeds: int64 array (bit pattern of the unsigned seed) with one
    shuffle seed per epoch. Returns -1, or the epoch index at which the
    batch loss went non-finite.
    """
    w_lists = [w.tolist() for w in weights]
    b_lists = [b.tolist() for b in biases]
    x_list = x.tolist()
    y_list = [int(v) for v in y]
    n = len(x_list)
    n_layers = len(w_lists)
    lr = float(lr)

    for epoch in range(len(epoch_seeds)):
        perm = permutation(n, int(epoch_seeds[epoch]) & _MASK)
        start = 0
        while start < n:
            idx = perm[start : start + batch_size]
            xb = [x_list[i] for i in idx]
            yb = [y_list[i] for i in idx]
            acts, probs = _forward_rows(w_lists, b_lists, xb, activation)
            if not math.isfinite(_batch_loss(probs, yb)):
                return epoch
            gw_lists, gb_lists, _ = _backward_rows(
                w_lists, acts, probs, yb, activation, False
            )
            for layer in range(n_layers):
                w = w_lists[layer]
                gw = gw_lists[layer]
                b = b_lists[layer]
                gb = gb_lists[layer]
                for r in range(len(w)):
                    wr = w[r]
                    gwr = gw[r]
                    for k in range(len(wr)):
                        wr[k] -= lr * gwr[k]
                    b[r] -= lr * gb[r]
            start += len(idx)

    for layer in range(n_layers):
        weights[layer][...] = w_lists[layer]
        biases[layer][...] = b_lists[layer]
    return -1
