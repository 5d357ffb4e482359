"""Central-difference gradient oracle shared by unit and acceptance tests."""

import numpy as np

from variance_forge import net


def fd_max_rel_error(params, x, y, h=1e-5):
    """Worst per-array relative gap between analytic and FD gradients.

    Compares layer by layer (weights, biases, then the input gradient)
    using norm ratios, so a handful of near-zero entries cannot blow up
    an otherwise accurate gradient.
    """
    x = np.array(x, dtype=np.float64)
    grads, gx = net.backward(params, x, y)

    def loss_now(inputs):
        return net.loss(net.forward(params, inputs), y)

    worst = 0.0

    def compare(analytic, fd):
        nonlocal worst
        denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - fd)) / denom)

    def fd_fill(arr):
        fd = np.zeros_like(arr)
        flat = arr.reshape(-1)
        out = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_now(x)
            flat[i] = orig - h
            down = loss_now(x)
            flat[i] = orig
            out[i] = (up - down) / (2.0 * h)
        return fd

    for layer in range(params.n_layers):
        compare(grads.weights[layer], fd_fill(params.weights[layer]))
        compare(grads.biases[layer], fd_fill(params.biases[layer]))

    fdx = np.zeros_like(x)
    flat = x.reshape(-1)
    out = fdx.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_now(x)
        flat[i] = orig - h
        down = loss_now(x)
        flat[i] = orig
        out[i] = (up - down) / (2.0 * h)
    compare(gx, fdx)
    return worst
