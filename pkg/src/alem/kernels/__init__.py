"""Dispatch layer over the numpy and numba kernel implementations.

Every public function takes an optional ``backend`` argument; ``None`` defers
to the ``ALEM_BACKEND`` environment variable (see :mod:`alem.backend`).
"""

import numpy as np

from ..backend import resolve_backend
from . import np_impl

_IMPLS = {"numpy": np_impl}


def _impl(backend):
    name = resolve_backend(backend)
    mod = _IMPLS.get(name)
    if mod is None:
        from . import nb_impl

        _IMPLS["numba"] = nb_impl
        mod = nb_impl
    return mod


def min_update_inplace(feats, center, min_dist, metric="l1", chunk_size=4096,
                       backend=None):
    """Lower min_dist elementwise by the distance of each row to ``center``.

    Rows are processed in chunks of ``chunk_size`` so the numpy path never
    materializes more than one (chunk, d) temporary; the result is identical
    for every chunk size. Mutates ``min_dist``.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    impl = _impl(backend)
    fn = impl.min_update_l1 if metric == "l1" else impl.min_update_l2
    n = feats.shape[0]
    for a in range(0, n, chunk_size):
        b = min(a + chunk_size, n)
        fn(feats[a:b], center, min_dist[a:b])


def conv1d_forward(x, w, b, stride, backend=None):
    return _impl(backend).conv1d_forward(x, w, b, stride)


def conv1d_backward(x, w, stride, dy, backend=None):
    return _impl(backend).conv1d_backward(x, w, stride, dy)


def warmup(backend=None):
    """Force jit compilation of the numba kernels (no-op on numpy)."""
    if resolve_backend(backend) != "numba":
        return
    x = np.zeros((2, 1, 4))
    w = np.zeros((1, 1, 3))
    b = np.zeros(1)
    y = conv1d_forward(x, w, b, 1, backend="numba")
    conv1d_backward(x, w, 1, y, backend="numba")
    feats = np.zeros((4, 2))
    md = np.full(4, np.inf)
    min_update_inplace(feats, feats[0], md, "l1", 2, backend="numba")
    min_update_inplace(feats, feats[0], md, "l2", 2, backend="numba")
