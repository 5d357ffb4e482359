# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training/inference kernels.

Bit-for-bit mirror of pykernels.py: same accumulation order, same libm
calls, same splitmix64 shuffle. Any arithmetic change must be made in both
files together (test_kernels.py enforces the parity).

Parameters are flattened into single buffers with per-layer offsets so the
hot loops can run without the GIL; evaluate_pool relies on that to gain
real thread parallelism on this backend.
"""

from libc.math cimport exp, log, tanh, INFINITY, isfinite
from libc.stdint cimport int64_t, uint64_t
from libc.string cimport memset

import numpy as np

BACKEND = "cython"

ACT_RELU = 0
ACT_TANH = 1

cdef uint64_t _GOLDEN = <uint64_t>0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef void _fill_perm(int64_t* perm, int n, uint64_t seed) nogil:
    cdef int i
    cdef uint64_t state = seed
    cdef int64_t j, tmp
    for i in range(n):
        perm[i] = i
    for i in range(n - 1, 0, -1):
        state = state + _GOLDEN
        j = <int64_t>(_mix(state) % <uint64_t>(i + 1))
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp


cdef void _forward_core(const double* wflat, const double* bflat,
                        const int64_t* woff, const int64_t* boff,
                        const int64_t* widths, int n_layers,
                        double* abuf, const int64_t* aoff,
                        double* probs, int nb, int activation) nogil:
    cdef int layer, i, r, k, inw, outw
    cdef double acc, mx, e, s
    cdef const double* ain
    cdef double* aout
    cdef const double* wl
    cdef const double* bl
    cdef double* prow
    for layer in range(n_layers):
        inw = <int>widths[layer]
        outw = <int>widths[layer + 1]
        ain = abuf + aoff[layer]
        wl = wflat + woff[layer]
        bl = bflat + boff[layer]
        if layer < n_layers - 1:
            aout = abuf + aoff[layer + 1]
            for i in range(nb):
                for r in range(outw):
                    acc = bl[r]
                    for k in range(inw):
                        acc += wl[r * inw + k] * ain[i * inw + k]
                    if activation == 0:
                        aout[i * outw + r] = acc if acc > 0.0 else 0.0
                    else:
                        aout[i * outw + r] = tanh(acc)
        else:
            for i in range(nb):
                prow = probs + i * outw
                for r in range(outw):
                    acc = bl[r]
                    for k in range(inw):
                        acc += wl[r * inw + k] * ain[i * inw + k]
                    prow[r] = acc
                mx = prow[0]
                for r in range(outw):
                    if prow[r] > mx:
                        mx = prow[r]
                s = 0.0
                for r in range(outw):
                    e = exp(prow[r] - mx)
                    prow[r] = e
                    s += e
                for r in range(outw):
                    prow[r] = prow[r] / s


cdef double _batch_loss(const double* probs, const int64_t* yb, int nb, int m) nogil:
    cdef double acc = 0.0
    cdef double p
    cdef int i
    for i in range(nb):
        p = probs[i * m + yb[i]]
        if p > 0.0:
            acc += -log(p)
        else:
            acc = INFINITY
            break
    return acc / nb


cdef void _backward_core(const double* wflat,
                         const int64_t* woff, const int64_t* boff,
                         const int64_t* widths, int n_layers,
                         const double* abuf, const int64_t* aoff,
                         const double* probs, const int64_t* yb, int nb,
                         int activation, bint want_input_grad,
                         double* dz_a, double* dz_b,
                         double* gwflat, double* gbflat,
                         double* input_grad) nogil:
    cdef int layer, i, r, k, inw, outw, m
    cdef double d, acc, a
    cdef double* dz = dz_a
    cdef double* dznew = dz_b
    cdef double* swp
    cdef const double* ain
    cdef const double* wl
    cdef double* gw
    cdef double* gb
    m = <int>widths[n_layers]
    for i in range(nb):
        for r in range(m):
            dz[i * m + r] = (probs[i * m + r] - (1.0 if r == yb[i] else 0.0)) / nb
    for layer in range(n_layers - 1, -1, -1):
        inw = <int>widths[layer]
        outw = <int>widths[layer + 1]
        ain = abuf + aoff[layer]
        wl = wflat + woff[layer]
        gw = gwflat + woff[layer]
        gb = gbflat + boff[layer]
        for i in range(nb):
            for r in range(outw):
                d = dz[i * outw + r]
                gb[r] += d
                for k in range(inw):
                    gw[r * inw + k] += d * ain[i * inw + k]
        if layer > 0:
            for i in range(nb):
                for k in range(inw):
                    acc = 0.0
                    for r in range(outw):
                        acc += dz[i * outw + r] * wl[r * inw + k]
                    a = ain[i * inw + k]
                    if activation == 0:
                        dznew[i * inw + k] = acc if a > 0.0 else 0.0
                    else:
                        dznew[i * inw + k] = acc * (1.0 - a * a)
            swp = dz
            dz = dznew
            dznew = swp
        elif want_input_grad:
            for i in range(nb):
                for k in range(inw):
                    acc = 0.0
                    for r in range(outw):
                        acc += dz[i * outw + r] * wl[r * inw + k]
                    input_grad[i * inw + k] = acc


cdef int _train_core(double* wflat, double* bflat,
                     const int64_t* woff, const int64_t* boff,
                     const int64_t* widths, int n_layers,
                     int64_t w_total, int64_t b_total,
                     const double* x, const int64_t* y, int n, int d,
                     int activation, const int64_t* epoch_seeds, int epochs,
                     int batch_size, double lr,
                     int64_t* perm, int64_t* yb,
                     double* abuf, const int64_t* aoff,
                     double* probs, double* dz_a, double* dz_b,
                     double* gwflat, double* gbflat) nogil:
    cdef int epoch, start, nb, i, k, m, src
    cdef int64_t j
    cdef double* a0 = abuf + aoff[0]
    m = <int>widths[n_layers]
    for epoch in range(epochs):
        _fill_perm(perm, n, <uint64_t>epoch_seeds[epoch])
        start = 0
        while start < n:
            nb = batch_size if batch_size < n - start else n - start
            for i in range(nb):
                src = <int>perm[start + i]
                for k in range(d):
                    a0[i * d + k] = x[src * d + k]
                yb[i] = y[src]
            _forward_core(wflat, bflat, woff, boff, widths, n_layers,
                          abuf, aoff, probs, nb, activation)
            if not isfinite(_batch_loss(probs, yb, nb, m)):
                return epoch
            memset(gwflat, 0, w_total * sizeof(double))
            memset(gbflat, 0, b_total * sizeof(double))
            _backward_core(wflat, woff, boff, widths, n_layers,
                           abuf, aoff, probs, yb, nb, activation, False,
                           dz_a, dz_b, gwflat, gbflat, NULL)
            for j in range(w_total):
                wflat[j] -= lr * gwflat[j]
            for j in range(b_total):
                bflat[j] -= lr * gbflat[j]
            start += nb
    return -1


cdef class _Workspace:
    """Flattened parameter buffers plus layer offsets for one architecture."""
    cdef public object widths, woff, boff, wflat, bflat
    cdef public int n_layers


def _flatten(weights, biases, int d):
    ws = _Workspace()
    ws.n_layers = len(weights)
    widths = np.empty(ws.n_layers + 1, dtype=np.int64)
    widths[0] = d
    for l in range(ws.n_layers):
        widths[l + 1] = weights[l].shape[0]
    woff = np.zeros(ws.n_layers, dtype=np.int64)
    boff = np.zeros(ws.n_layers, dtype=np.int64)
    for l in range(1, ws.n_layers):
        woff[l] = woff[l - 1] + widths[l] * widths[l - 1]
        boff[l] = boff[l - 1] + widths[l]
    ws.widths = widths
    ws.woff = woff
    ws.boff = boff
    ws.wflat = np.concatenate([np.ascontiguousarray(w, dtype=np.float64).ravel() for w in weights])
    ws.bflat = np.concatenate([np.ascontiguousarray(b, dtype=np.float64) for b in biases])
    return ws


def _act_offsets(widths, int n_layers, int nb):
    aoff = np.zeros(n_layers, dtype=np.int64)
    for l in range(1, n_layers):
        aoff[l] = aoff[l - 1] + nb * widths[l - 1]
    total = int(aoff[n_layers - 1] + nb * widths[n_layers - 1])
    return aoff, total


def forward(weights, biases, x, int activation):
    """Class probabilities for every row of x. Shapes: x (n, d) -> (n, m)."""
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    ws = _flatten(weights, biases, d)
    cdef int n_layers = ws.n_layers
    aoff_arr, atotal = _act_offsets(ws.widths, n_layers, n)
    cdef int m = int(ws.widths[n_layers])

    abuf_arr = np.empty(atotal, dtype=np.float64)
    abuf_arr[: n * d] = np.ascontiguousarray(x, dtype=np.float64).ravel()
    probs_arr = np.empty(n * m, dtype=np.float64)

    cdef double[::1] wflat = ws.wflat
    cdef double[::1] bflat = ws.bflat
    cdef int64_t[::1] woff = ws.woff
    cdef int64_t[::1] boff = ws.boff
    cdef int64_t[::1] widths = ws.widths
    cdef int64_t[::1] aoff = aoff_arr
    cdef double[::1] abuf = abuf_arr
    cdef double[::1] probs = probs_arr

    with nogil:
        _forward_core(&wflat[0], &bflat[0], &woff[0], &boff[0], &widths[0],
                      n_layers, &abuf[0], &aoff[0], &probs[0], n, activation)
    return probs_arr.reshape(n, m)


def backward(weights, biases, x, y, int activation, bint want_input_grad=True):
    """Gradients of the mean cross-entropy w.r.t. weights, biases, inputs."""
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    ws = _flatten(weights, biases, d)
    cdef int n_layers = ws.n_layers
    aoff_arr, atotal = _act_offsets(ws.widths, n_layers, n)
    cdef int m = int(ws.widths[n_layers])
    cdef int maxw = int(max(ws.widths[l] for l in range(1, n_layers + 1)))

    abuf_arr = np.empty(atotal, dtype=np.float64)
    abuf_arr[: n * d] = np.ascontiguousarray(x, dtype=np.float64).ravel()
    probs_arr = np.empty(n * m, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.int64)
    gw_arr = np.zeros(len(ws.wflat), dtype=np.float64)
    gb_arr = np.zeros(len(ws.bflat), dtype=np.float64)
    dza_arr = np.empty(n * maxw, dtype=np.float64)
    dzb_arr = np.empty(n * maxw, dtype=np.float64)
    gx_arr = np.empty(n * d, dtype=np.float64) if want_input_grad else np.empty(1, dtype=np.float64)

    cdef double[::1] wflat = ws.wflat
    cdef double[::1] bflat = ws.bflat
    cdef int64_t[::1] woff = ws.woff
    cdef int64_t[::1] boff = ws.boff
    cdef int64_t[::1] widths = ws.widths
    cdef int64_t[::1] aoff = aoff_arr
    cdef double[::1] abuf = abuf_arr
    cdef double[::1] probs = probs_arr
    cdef int64_t[::1] yv = y_arr
    cdef double[::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef double[::1] dza = dza_arr
    cdef double[::1] dzb = dzb_arr
    cdef double[::1] gx = gx_arr

    with nogil:
        _forward_core(&wflat[0], &bflat[0], &woff[0], &boff[0], &widths[0],
                      n_layers, &abuf[0], &aoff[0], &probs[0], n, activation)
        _backward_core(&wflat[0], &woff[0], &boff[0], &widths[0], n_layers,
                       &abuf[0], &aoff[0], &probs[0], &yv[0], n, activation,
                       want_input_grad, &dza[0], &dzb[0], &gw[0], &gb[0], &gx[0])

    gws = []
    gbs = []
    for l in range(n_layers):
        outw = int(ws.widths[l + 1])
        inw = int(ws.widths[l])
        o = int(ws.woff[l])
        gws.append(gw_arr[o : o + outw * inw].reshape(outw, inw))
        o = int(ws.boff[l])
        gbs.append(gb_arr[o : o + outw].copy())
    return gws, gbs, (gx_arr.reshape(n, d) if want_input_grad else None)


def train_sgd(weights, biases, x, y, int activation, epoch_seeds, int batch_size, double lr):
    """Mini-batch SGD, mutating weights/biases in place.

    Returns -1, or the epoch index at which the batch loss went non-finite
    (in which case weights/biases are left untouched).
    """
    cdef int n = x.shape[0]
    cdef int d = x.shape[1]
    ws = _flatten(weights, biases, d)
    cdef int n_layers = ws.n_layers
    cdef int epochs = len(epoch_seeds)
    aoff_arr, atotal = _act_offsets(ws.widths, n_layers, batch_size)
    cdef int m = int(ws.widths[n_layers])
    cdef int maxw = int(max(ws.widths[l] for l in range(1, n_layers + 1)))

    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    y_arr = np.ascontiguousarray(y, dtype=np.int64)
    seeds_arr = np.ascontiguousarray(epoch_seeds, dtype=np.int64)
    perm_arr = np.empty(n, dtype=np.int64)
    yb_arr = np.empty(batch_size, dtype=np.int64)
    abuf_arr = np.empty(atotal, dtype=np.float64)
    probs_arr = np.empty(batch_size * m, dtype=np.float64)
    dza_arr = np.empty(batch_size * maxw, dtype=np.float64)
    dzb_arr = np.empty(batch_size * maxw, dtype=np.float64)
    gw_arr = np.zeros(len(ws.wflat), dtype=np.float64)
    gb_arr = np.zeros(len(ws.bflat), dtype=np.float64)
    cdef int64_t w_total = len(ws.wflat)
    cdef int64_t b_total = len(ws.bflat)

    cdef double[::1] wflat = ws.wflat
    cdef double[::1] bflat = ws.bflat
    cdef int64_t[::1] woff = ws.woff
    cdef int64_t[::1] boff = ws.boff
    cdef int64_t[::1] widths = ws.widths
    cdef int64_t[::1] aoff = aoff_arr
    cdef double[:, ::1] xv = x_arr
    cdef int64_t[::1] yv = y_arr
    cdef int64_t[::1] seeds = seeds_arr
    cdef int64_t[::1] perm = perm_arr
    cdef int64_t[::1] yb = yb_arr
    cdef double[::1] abuf = abuf_arr
    cdef double[::1] probs = probs_arr
    cdef double[::1] dza = dza_arr
    cdef double[::1] dzb = dzb_arr
    cdef double[::1] gw = gw_arr
    cdef double[::1] gb = gb_arr

    cdef int status
    with nogil:
        status = _train_core(&wflat[0], &bflat[0], &woff[0], &boff[0], &widths[0],
                             n_layers, w_total, b_total,
                             &xv[0, 0], &yv[0], n, d,
                             activation, &seeds[0], epochs, batch_size, lr,
                             &perm[0], &yb[0], &abuf[0], &aoff[0],
                             &probs[0], &dza[0], &dzb[0], &gw[0], &gb[0])

    if status == -1:
        for l in range(n_layers):
            outw = int(ws.widths[l + 1])
            inw = int(ws.widths[l])
            o = int(ws.woff[l])
            weights[l][...] = ws.wflat[o : o + outw * inw].reshape(outw, inw)
            o = int(ws.boff[l])
            biases[l][...] = ws.bflat[o : o + outw]
    return status


def permutation(int n, seed):
    """Fisher-Yates permutation of range(n); parity hook for the tests."""
    perm_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] perm = perm_arr
    cdef uint64_t s = <uint64_t>(int(seed) & ((1 << 64) - 1))
    if n > 0:
        with nogil:
            _fill_perm(&perm[0], n, s)
    return perm_arr.tolist()
