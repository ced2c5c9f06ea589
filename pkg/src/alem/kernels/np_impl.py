"""Pure-numpy reference implementations of the hot kernels.

These define the semantics; the numba implementations in ``nb_impl`` must
match them to float rounding. Per-row reductions here run along the last
axis of contiguous arrays, so results are independent of how callers chunk
the row dimension.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def min_update_l1(feats, center, min_dist):
    """min_dist[i] <- min(min_dist[i], sum_j |feats[i,j] - center[j]|), in place."""
    diff = feats - center
    np.abs(diff, out=diff)
    d = diff.sum(axis=1)
    np.minimum(min_dist, d, out=min_dist)


def min_update_l2(feats, center, min_dist):
    """Same as min_update_l1 with Euclidean distance."""
    diff = feats - center
    np.multiply(diff, diff, out=diff)
    d = diff.sum(axis=1)
    np.sqrt(d, out=d)
    np.minimum(min_dist, d, out=min_dist)


def conv1d_forward(x, w, b, stride):
    """Valid 1-D convolution.

    x: (batch, in_ch, length); w: (out_ch, in_ch, k); b: (out_ch,).
    Returns (batch, out_ch, (length - k) // stride + 1).
    """
    k = w.shape[2]
    windows = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]
    y = np.einsum("ock,bcpk->bop", w, windows, optimize=True)
    y += b[None, :, None]
    return np.ascontiguousarray(y)


def conv1d_backward(x, w, stride, dy):
    """Gradients of conv1d_forward w.r.t. input, weights, and bias."""
    k = w.shape[2]
    out_len = dy.shape[2]
    windows = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]
    dw = np.einsum("bop,bcpk->ock", dy, windows, optimize=True)
    db = dy.sum(axis=(0, 2))
    dx = np.zeros_like(x)
    for kk in range(k):
        sl = slice(kk, kk + stride * out_len, stride)
        dx[:, :, sl] += np.einsum("bop,oc->bcp", dy, w[:, :, kk], optimize=True)
    return dx, np.ascontiguousarray(dw), db
