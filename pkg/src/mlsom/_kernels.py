"""Numba kernels for the hot loops: distance pass, top-n selection, fused update.

All kernels are generic over the grid dtype (float32 or float64); the distance
sum is always accumulated in float64.
"""

import numpy as np
from numba import njit, prange

_FASTMATH = {"reassoc", "nsz", "contract"}
# above this count a stable argsort beats insertion selection
_INSERTION_LIMIT = 64


@njit(cache=True, fastmath=_FASTMATH)
def distances_into(weights, patch, out):
    n, d = weights.shape
    for j in range(n):
        acc = 0.0
        for i in range(d):
            diff = np.float64(patch[i]) - np.float64(weights[j, i])
            acc += diff * diff
        out[j] = np.sqrt(acc)


@njit(cache=True)
def select_into(dist, count, idx_out, dist_out):
    """Write the `count` smallest entries of `dist` in ascending order.

    Ties resolve to the lower flattened index.
    """
    n = dist.shape[0]
    if count > _INSERTION_LIMIT:
        order = np.argsort(dist, kind="mergesort")
        for t in range(count):
            idx_out[t] = order[t]
            dist_out[t] = dist[order[t]]
        return
    filled = 0
    for j in range(n):
        dj = dist[j]
        if filled == count:
            if dj >= dist_out[count - 1]:
                continue
            pos = count - 1
        else:
            pos = filled
            filled += 1
        while pos > 0 and dist_out[pos - 1] > dj:
            dist_out[pos] = dist_out[pos - 1]
            idx_out[pos] = idx_out[pos - 1]
            pos -= 1
        dist_out[pos] = dj
        idx_out[pos] = j


@njit(cache=True, fastmath=_FASTMATH)
def apply_winners(weights, patch, winners, width, lr, sigma, keep, step):
    """Move every neuron toward `patch` for all winners at once.

    Applying W += a_1 (p - W), then W += a_2 (p - W), ... in sequence equals a
    single step with s = 1 - prod(1 - a_i), so one pass over the grid suffices.
    The step is written as W (1 - s) + s p, exact at s = 0 and s = 1.
    `keep` and `step` are scratch vectors with the grid's dtype.
    """
    n, d = weights.shape
    inv = 1.0 / (2.0 * sigma * sigma)
    for j in range(n):
        rj = j // width
        cj = j % width
        retain = 1.0
        for t in range(winners.shape[0]):
            w = winners[t]
            dr = rj - w // width
            dc = cj - w % width
            retain *= 1.0 - lr * np.exp(-(dr * dr + dc * dc) * inv)
        keep[j] = retain
        step[j] = 1.0 - retain
    for j in range(n):
        if keep[j] == 1:
            continue
        a = keep[j]
        b = step[j]
        for i in range(d):
            weights[j, i] = weights[j, i] * a + b * patch[i]


@njit(cache=True)
def train_patches(weights, patches, count, width, lr, sigma):
    """Sequential SOM steps over the rows of `patches`; mutates `weights`."""
    n = weights.shape[0]
    dist = np.empty(n, dtype=np.float64)
    idx = np.empty(count, dtype=np.int64)
    dsel = np.empty(count, dtype=np.float64)
    keep = np.empty(n, dtype=weights.dtype)
    step = np.empty(n, dtype=weights.dtype)
    for p in range(patches.shape[0]):
        distances_into(weights, patches[p], dist)
        select_into(dist, count, idx, dsel)
        apply_winners(weights, patches[p], idx, width, lr, sigma, keep, step)


@njit(cache=True, parallel=True)
def encode_batch(weights, patches, k, out):
    """Union of per-patch top-k codes; `patches` is (images, P, dim), `out` (images, n)."""
    n = weights.shape[0]
    for b in prange(patches.shape[0]):
        dist = np.empty(n, dtype=np.float64)
        idx = np.empty(k, dtype=np.int64)
        dsel = np.empty(k, dtype=np.float64)
        for p in range(patches.shape[1]):
            distances_into(weights, patches[b, p], dist)
            select_into(dist, k, idx, dsel)
            for t in range(k):
                out[b, idx[t]] = 1


@njit(cache=True, parallel=True)
def nearest_distances(weights, patches, out):
    n = weights.shape[0]
    for p in prange(patches.shape[0]):
        dist = np.empty(n, dtype=np.float64)
        distances_into(weights, patches[p], dist)
        out[p] = dist.min()
