"""Numba implementations of the hot kernels.

Parallelism is only over independent output rows (pool rows, batch items,
output channels), each reduced sequentially in a fixed order, so results are
bitwise reproducible for any thread count. No kernel allocates: callers own
all buffers, which keeps peak auxiliary memory at the orchestration level.
"""

import numpy as np
from numba import njit, prange


@njit(parallel=True, cache=True)
def min_update_l1(feats, center, min_dist):
    n, d = feats.shape
    for i in prange(n):
        s = 0.0
        for j in range(d):
            s += abs(feats[i, j] - center[j])
        if s < min_dist[i]:
            min_dist[i] = s


@njit(parallel=True, cache=True)
def min_update_l2(feats, center, min_dist):
    n, d = feats.shape
    for i in prange(n):
        s = 0.0
        for j in range(d):
            diff = feats[i, j] - center[j]
            s += diff * diff
        s = np.sqrt(s)
        if s < min_dist[i]:
            min_dist[i] = s


@njit(parallel=True, cache=True)
def _conv1d_forward(x, w, b, stride, out):
    n_batch, n_in, _ = x.shape
    n_out, _, k = w.shape
    out_len = out.shape[2]
    for bi in prange(n_batch):
        for o in range(n_out):
            for p in range(out_len):
                acc = b[o]
                base = p * stride
                for c in range(n_in):
                    for kk in range(k):
                        acc += w[o, c, kk] * x[bi, c, base + kk]
                out[bi, o, p] = acc


@njit(parallel=True, cache=True)
def _conv1d_backward_dx(dy, w, stride, dx):
    n_batch, n_out, out_len = dy.shape
    _, n_in, k = w.shape
    length = dx.shape[2]
    for bi in prange(n_batch):
        for c in range(n_in):
            for i in range(length):
                dx[bi, c, i] = 0.0
        for o in range(n_out):
            for p in range(out_len):
                g = dy[bi, o, p]
                base = p * stride
                for c in range(n_in):
                    for kk in range(k):
                        dx[bi, c, base + kk] += g * w[o, c, kk]


@njit(parallel=True, cache=True)
def _conv1d_backward_dw(dy, x, stride, dw, db):
    n_batch, n_out, out_len = dy.shape
    _, n_in, _ = x.shape
    k = dw.shape[2]
    for o in prange(n_out):
        db[o] = 0.0
        for c in range(n_in):
            for kk in range(k):
                dw[o, c, kk] = 0.0
        for bi in range(n_batch):
            for p in range(out_len):
                g = dy[bi, o, p]
                base = p * stride
                db[o] += g
                for c in range(n_in):
                    for kk in range(k):
                        dw[o, c, kk] += g * x[bi, c, base + kk]


def conv1d_forward(x, w, b, stride):
    out_len = (x.shape[2] - w.shape[2]) // stride + 1
    out = np.empty((x.shape[0], w.shape[0], out_len), dtype=x.dtype)
    _conv1d_forward(x, w, b, stride, out)
    return out


def conv1d_backward(x, w, stride, dy):
    dx = np.empty_like(x)
    dw = np.empty_like(w)
    db = np.empty(w.shape[0], dtype=w.dtype)
    _conv1d_backward_dx(dy, w, stride, dx)
    _conv1d_backward_dw(dy, x, stride, dw, db)
    return dx, dw, db
