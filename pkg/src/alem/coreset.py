"""Greedy and exact k-center selection over feature rows.

Distances are computed one center at a time against the whole pool in
memory-bounded chunks, so no pairwise matrix is ever materialized. Every
pass over the pool counts n distance evaluations; selecting b centers from
an empty start costs exactly b * n evaluations.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

_METRICS = ("l1", "l2")


@dataclass
class SelectionState:
    """Outcome of a greedy selection run.

    centers: every center index, initial ones first, in addition order.
    added:   only the indices chosen by this run.
    min_dist: distance from each pool row to its nearest center.
    radius:  max of min_dist (the cover radius delta).
    radius_before: cover radius of the initial centers alone (inf if none).
    n_dist_evals: pool passes * pool size, the work measure.
    """

    centers: np.ndarray
    added: np.ndarray
    min_dist: np.ndarray
    radius: float
    radius_before: float
    n_dist_evals: int


def _check_feats(feats, metric):
    feats = np.ascontiguousarray(feats, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {feats.shape}")
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {_METRICS}, got {metric!r}")
    return feats


def pairwise_min_update(min_dist, feats, new_center, metric="l1",
                        chunk_size=4096, backend=None):
    """Elementwise min of min_dist with the distances to row new_center.

    Pure: returns a new array, inputs untouched. Result is independent of
    chunk_size (each row's distance is reduced on its own).
    """
    feats = _check_feats(feats, metric)
    out = np.array(min_dist, dtype=np.float64, copy=True)
    if out.shape != (feats.shape[0],):
        raise ValueError(f"min_dist shape {out.shape} does not match pool "
                         f"size {feats.shape[0]}")
    new_center = int(new_center)
    if not 0 <= new_center < feats.shape[0]:
        raise ValueError(f"center index {new_center} out of range")
    kernels.min_update_inplace(feats, feats[new_center], out, metric=metric,
                               chunk_size=chunk_size, backend=backend)
    return out


def kcenter_greedy(feats, k, initial=(), metric="l1", chunk_size=4096,
                   backend=None):
    """Add k centers by farthest-point traversal.

    Starts from the given center indices; with none, row 0 seeds the set and
    counts toward k. Each step adds the point farthest from all current
    centers (lowest index on ties). Once every remaining point coincides
    with a center, remaining picks fall back to the lowest unused indices.
    """
    feats = _check_feats(feats, metric)
    n = feats.shape[0]
    initial = [int(i) for i in initial]
    if len(set(initial)) != len(initial):
        raise ValueError("duplicate initial center")
    for i in initial:
        if not 0 <= i < n:
            raise ValueError(f"initial center {i} out of range for pool {n}")
    if k < 0:
        raise ValueError("k must be non-negative")
    if len(initial) + k > n:
        raise ValueError(f"cannot place {len(initial) + k} centers over "
                         f"{n} points")

    min_dist = np.full(n, np.inf, dtype=np.float64)
    is_center = np.zeros(n, dtype=bool)
    n_evals = 0

    def absorb(idx):
        nonlocal min_dist, n_evals
        is_center[idx] = True
        kernels.min_update_inplace(feats, feats[idx], min_dist,
                                   metric=metric, chunk_size=chunk_size,
                                   backend=backend)
        n_evals += n

    centers = []
    for i in initial:
        centers.append(i)
        absorb(i)
    radius_before = float(min_dist.max()) if centers else math.inf

    added = []
    remaining = k
    if not centers and remaining > 0:
        centers.append(0)
        added.append(0)
        absorb(0)
        remaining -= 1

    for _ in range(remaining):
        cand = int(np.argmax(min_dist))
        if min_dist[cand] <= 0.0:
            # pool exhausted up to duplicates: take the lowest unused index
            cand = int(np.flatnonzero(~is_center)[0])
        centers.append(cand)
        added.append(cand)
        absorb(cand)

    radius = float(min_dist.max()) if centers else math.inf
    return SelectionState(np.asarray(centers, dtype=np.int64),
                          np.asarray(added, dtype=np.int64),
                          min_dist, radius, radius_before, n_evals)


def cover_radius(feats, centers, metric="l1", chunk_size=4096, backend=None):
    """Max over pool rows of the distance to the nearest given center."""
    feats = _check_feats(feats, metric)
    centers = [int(c) for c in centers]
    if not centers:
        raise ValueError("no centers")
    min_dist = np.full(feats.shape[0], np.inf, dtype=np.float64)
    for c in centers:
        kernels.min_update_inplace(feats, feats[c], min_dist, metric=metric,
                                   chunk_size=chunk_size, backend=backend)
    return float(min_dist.max())


def kcenter_bruteforce(feats, k, metric="l1", max_subsets=2_000_000):
    """Exact k-center by exhaustive subset search.

    Returns (centers, radius) with centers the lexicographically smallest
    optimal index tuple. Only for tiny instances; refuses when C(n, k)
    exceeds max_subsets.
    """
    feats = _check_feats(feats, metric)
    n = feats.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if math.comb(n, k) > max_subsets:
        raise ValueError(f"C({n},{k}) subsets exceed limit {max_subsets}")
    if metric == "l1":
        dmat = np.abs(feats[:, None, :] - feats[None, :, :]).sum(axis=2)
    else:
        dmat = np.sqrt(((feats[:, None, :] - feats[None, :, :]) ** 2).sum(axis=2))
    best_r = math.inf
    best = None
    for subset in itertools.combinations(range(n), k):
        r = dmat[:, subset].min(axis=1).max()
        if r < best_r:  # strict: first optimum wins, lexicographic order
            best_r = r
            best = subset
    return best, float(best_r)
