"""Bit-for-bit agreement between the pure-Python and compiled kernels.

Every assertion here is exact equality: the two backends share the same
accumulation order and libm calls, so on one platform their outputs must
be indistinguishable down to the last bit.
"""

import numpy as np
import pytest

from variance_forge._kernel import pykernels
from variance_forge.rng import SplitMix64, derive_seed

ckernels = pytest.importorskip(
    "variance_forge._kernel.ckernels", reason="compiled backend not built"
)

ACTS = (pykernels.ACT_RELU, pykernels.ACT_TANH)


def _make_net(widths, seed):
    gen = SplitMix64(seed)
    weights, biases = [], []
    for i in range(len(widths) - 1):
        weights.append(gen.normal_array((widths[i + 1], widths[i])) * 0.5)
        biases.append(gen.normal_array((widths[i + 1],)) * 0.1)
    return weights, biases


def _copy(ws, bs):
    return [w.copy() for w in ws], [b.copy() for b in bs]


def _make_batch(n, d, m, seed):
    gen = SplitMix64(seed)
    x = gen.normal_array((n, d))
    y = np.array([gen.randint(m) for _ in range(n)], dtype=np.int64)
    return x, y


def _epoch_seeds(base, epochs):
    return np.array(
        [derive_seed(base, "shuffle", e) for e in range(epochs)], dtype=np.uint64
    ).view(np.int64)


@pytest.mark.parametrize("n", [1, 2, 7, 240])
@pytest.mark.parametrize("seed", [0, 1, 12345, 2**63 + 11])
def test_permutation_parity(n, seed):
    assert pykernels.permutation(n, seed) == ckernels.permutation(n, seed)


@pytest.mark.parametrize("activation", ACTS)
def test_forward_parity(activation):
    ws, bs = _make_net([3, 5, 4], 10)
    x, _ = _make_batch(9, 3, 4, 11)
    a = pykernels.forward(ws, bs, x, activation)
    b = ckernels.forward(ws, bs, x, activation)
    assert np.array_equal(a, b)


def test_forward_parity_deep_and_single_layer():
    for widths in ([2, 3], [4, 7, 6, 3]):
        ws, bs = _make_net(widths, 21)
        x, _ = _make_batch(5, widths[0], widths[-1], 22)
        a = pykernels.forward(ws, bs, x, pykernels.ACT_RELU)
        b = ckernels.forward(ws, bs, x, pykernels.ACT_RELU)
        assert np.array_equal(a, b)


@pytest.mark.parametrize("activation", ACTS)
@pytest.mark.parametrize("want_input_grad", [True, False])
def test_backward_parity(activation, want_input_grad):
    ws, bs = _make_net([3, 6, 4], 30)
    x, y = _make_batch(8, 3, 4, 31)
    gw_a, gb_a, gx_a = pykernels.backward(ws, bs, x, y, activation, want_input_grad)
    gw_b, gb_b, gx_b = ckernels.backward(ws, bs, x, y, activation, want_input_grad)
    for a, b in zip(gw_a, gw_b):
        assert np.array_equal(a, b)
    for a, b in zip(gb_a, gb_b):
        assert np.array_equal(a, b)
    if want_input_grad:
        assert np.array_equal(gx_a, gx_b)
    else:
        assert gx_a is None and gx_b is None


@pytest.mark.parametrize("activation", ACTS)
def test_train_parity(activation):
    ws, bs = _make_net([2, 5, 3], 40)
    x, y = _make_batch(23, 2, 3, 41)
    seeds = _epoch_seeds(9, 12)

    ws_py, bs_py = _copy(ws, bs)
    ws_cy, bs_cy = _copy(ws, bs)
    # Batch 5 does not divide 23, so the last batch each epoch is short.
    ra = pykernels.train_sgd(ws_py, bs_py, x, y, activation, seeds, 5, 0.1)
    rb = ckernels.train_sgd(ws_cy, bs_cy, x, y, activation, seeds, 5, 0.1)
    assert ra == rb == -1
    for a, b in zip(ws_py, ws_cy):
        assert np.array_equal(a, b)
    for a, b in zip(bs_py, bs_cy):
        assert np.array_equal(a, b)
    # And training actually moved the weights.
    assert not np.array_equal(ws_py[0], ws[0])


def test_divergence_epoch_parity():
    ws, bs = _make_net([2, 4, 3], 50)
    x, y = _make_batch(16, 2, 3, 51)
    seeds = _epoch_seeds(1, 8)
    ws_py, bs_py = _copy(ws, bs)
    ws_cy, bs_cy = _copy(ws, bs)
    # An absurd step size sends the loss non-finite.
    ra = pykernels.train_sgd(ws_py, bs_py, x, y, pykernels.ACT_RELU, seeds, 4, 1e12)
    rb = ckernels.train_sgd(ws_cy, bs_cy, x, y, pykernels.ACT_RELU, seeds, 4, 1e12)
    assert ra == rb
    assert ra >= 0
