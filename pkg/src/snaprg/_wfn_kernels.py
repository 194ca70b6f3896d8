"""Blocked all-pairs Hamming scans over bit-packed snapshots.

The scans walk the upper triangle of the pair matrix in row chunks of
roughly equal work, with rows sorted by popcount so that the popcount
difference (a lower bound on the distance) prunes most pairs.  Every chunk
writes into its own row of a private accumulator, so the reductions (min /
sum of integers) are exact and the result does not depend on the number of
threads.
"""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

from ._bits import popcount64

# try OpenMP before TBB; an outdated TBB makes numba warn on every launch
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

# words accumulated between early-exit checks; must stay large enough for
# the inner loop to vectorize
_CHUNK_WORDS = 32


@njit(cache=True, inline="always")
def _row_distance(a, b):
    d = 0
    for w in range(a.shape[0]):
        d += popcount64(a[w] ^ b[w])
    return d


@njit(cache=True, inline="always")
def _distance_bounded(a, b, bound):
    """Hamming distance, or any value >= bound once the partial sum reaches it."""
    d = 0
    for w0 in range(0, a.shape[0], _CHUNK_WORDS):
        d += _row_distance(a[w0:w0 + _CHUNK_WORDS], b[w0:w0 + _CHUNK_WORDS])
        if d >= bound:
            break
    return d


@njit(cache=True)
def hamming_rows(a, b):
    return _row_distance(a, b)


def chunk_bounds(n: int, n_chunks: int) -> np.ndarray:
    """Row boundaries splitting the upper triangle into equal-work chunks."""
    work = np.arange(n - 1, -1, -1, dtype=np.float64)
    cum = np.concatenate([[0.0], np.cumsum(work)])
    targets = np.linspace(0.0, cum[-1], n_chunks + 1)
    bounds = np.searchsorted(cum, targets, side="left")
    bounds[0], bounds[-1] = 0, n
    return np.unique(bounds).astype(np.int64)


@njit(cache=True, parallel=True)
def row_popcounts(X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in prange(n):
        c = 0
        for w in range(X.shape[1]):
            c += popcount64(X[i, w])
        out[i] = c
    return out


@njit(cache=True, parallel=True)
def seed_minima(X, k):
    """Upper bounds on each row's nearest distance from its ``k`` neighbors on
    either side (rows sorted by popcount)."""
    n, n_words = X.shape
    out = np.full(n, n_words * 64 + 1, dtype=np.int64)
    for i in prange(n):
        m = out[i]
        for j in range(max(0, i - k), min(n, i + k + 1)):
            if j != i:
                d = _distance_bounded(X[i], X[j], m)
                if d < m:
                    m = d
        out[i] = m
    return out


@njit(cache=True, parallel=True)
def nearest_neighbor_scan(X, pop, bounds, block, seed, record_below, capacity):
    """Exact nearest-neighbor distances, plus every pair closer than
    ``record_below``.

    Rows must be sorted by popcount ``pop``.  ``|pop_i - pop_j|`` is a lower
    bound on the distance, so a pair is skipped once it reaches the larger of
    the two current minima and ``record_below``; rows and whole blocks stop
    early for the same reason.  Recorded pairs go to per-chunk buffers of
    ``capacity``; ``counts[c] > capacity`` flags an overflow.
    """
    n = X.shape[0]
    n_chunks = bounds.shape[0] - 1
    private = np.empty((n_chunks, n), dtype=np.int64)
    pi_buf = np.empty((n_chunks, capacity), dtype=np.int32)
    pj_buf = np.empty((n_chunks, capacity), dtype=np.int32)
    pd_buf = np.empty((n_chunks, capacity), dtype=np.int32)
    counts = np.zeros(n_chunks, dtype=np.int64)
    for c in prange(n_chunks):
        mins = private[c]
        mins[:] = seed
        r0, r1 = bounds[c], bounds[c + 1]
        for ib in range(r0, r1, block):
            ie = min(ib + block, r1)
            for jb in range(ib, n, block):
                je = min(jb + block, n)
                cap_j = record_below
                for j in range(jb, je):
                    if mins[j] > cap_j:
                        cap_j = mins[j]
                cap = cap_j
                for i in range(ib, ie):
                    if mins[i] > cap:
                        cap = mins[i]
                if pop[jb] - pop[ie - 1] >= cap:
                    continue
                for i in range(ib, ie):
                    xi = X[i]
                    mi = mins[i]
                    p = pop[i]
                    for j in range(max(jb, i + 1), je):
                        diff = pop[j] - p
                        bound = max(mi, record_below)
                        if diff >= max(bound, cap_j):
                            break
                        if mins[j] > bound:
                            bound = mins[j]
                        if diff >= bound:
                            continue
                        d = _distance_bounded(xi, X[j], bound)
                        if d < record_below:
                            k = counts[c]
                            if k < capacity:
                                pi_buf[c, k] = i
                                pj_buf[c, k] = j
                                pd_buf[c, k] = d
                            counts[c] = k + 1
                        if d < mi:
                            mi = d
                        if d < mins[j]:
                            mins[j] = d
                    mins[i] = mi
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        m = private[0, i]
        for c in range(1, n_chunks):
            if private[c, i] < m:
                m = private[c, i]
        out[i] = m
    return out, pi_buf, pj_buf, pd_buf, counts


@njit(cache=True, parallel=True)
def threshold_degrees(X, pop, bounds, block, threshold):
    """Per-row count of other rows at distance < threshold (rows sorted by
    popcount)."""
    n = X.shape[0]
    n_chunks = bounds.shape[0] - 1
    private = np.zeros((n_chunks, n), dtype=np.int64)
    for c in prange(n_chunks):
        counts = private[c]
        r0, r1 = bounds[c], bounds[c + 1]
        for ib in range(r0, r1, block):
            ie = min(ib + block, r1)
            for jb in range(ib, n, block):
                if pop[jb] - pop[ie - 1] >= threshold:
                    break
                je = min(jb + block, n)
                for i in range(ib, ie):
                    xi = X[i]
                    p = pop[i]
                    ki = 0
                    for j in range(max(jb, i + 1), je):
                        if pop[j] - p >= threshold:
                            break
                        if _distance_bounded(xi, X[j], threshold) < threshold:
                            ki += 1
                            counts[j] += 1
                    counts[i] += ki
    out = np.zeros(n, dtype=np.int64)
    for c in range(n_chunks):
        for i in range(n):
            out[i] += private[c, i]
    return out


@njit(cache=True)
def count_pairs_below(n, pi, pj, pd, threshold):
    out = np.zeros(n, dtype=np.int64)
    for k in range(pi.shape[0]):
        if pd[k] < threshold:
            out[pi[k]] += 1
            out[pj[k]] += 1
    return out
