"""Wave-function-network degrees of a deduplicated snapshot set.

Nodes are unique snapshots.  Two nodes are joined when their Hamming
distance is below the cutoff ``R``, the mean over nodes of the distance to
the nearest other node.  Only the per-node nearest-neighbor distances and
degrees are computed; the adjacency itself is never stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from . import _wfn_kernels as K
from .dataset import DedupDataset, SnapshotDataset, deduplicate


class WfnError(ValueError):
    pass


def hamming(a, b) -> int:
    """Number of differing sites of two packed snapshots of equal length."""
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.shape != b.shape or a.ndim != 1:
        raise WfnError(f"snapshot lengths differ: {a.shape} vs {b.shape}")
    return int(K.hamming_rows(a, b))


@dataclass(frozen=True, eq=False)
class WfnResult:
    """Nearest-neighbor distances ``r1``, cutoff ``R`` and node degrees."""

    r1: np.ndarray = field(repr=False)
    cutoff: Fraction
    degrees: np.ndarray = field(repr=False)
    inclusive: bool = False

    @property
    def n_nodes(self) -> int:
        return int(self.degrees.size)

    @property
    def R(self) -> float:
        return float(self.cutoff)


def cutoff_threshold(cutoff: Fraction, inclusive: bool = False) -> int:
    """Smallest integer distance that is *not* an edge."""
    if inclusive:
        return math.floor(cutoff) + 1
    return math.ceil(cutoff)


def _resolve_threads(n_jobs: int | None) -> int:
    if n_jobs is None or n_jobs < 1:
        return numba.config.NUMBA_NUM_THREADS
    return min(int(n_jobs), numba.config.NUMBA_NUM_THREADS)


_SEED_NEIGHBORS = 2
_PROBE_ROWS = 2048


def _threshold_guess(Xs, pop, inclusive, block) -> int:
    """Edge threshold of an evenly spaced subsample.

    Fewer nodes have farther nearest neighbors, so this usually bounds the
    full threshold from above; a low guess only costs an extra pass.
    """
    n = Xs.shape[0]
    if n < 4 * _PROBE_ROWS:
        return 0
    idx = np.linspace(0, n - 1, _PROBE_ROWS).astype(np.int64)
    sub, sub_pop = np.ascontiguousarray(Xs[idx]), pop[idx]
    seed = K.seed_minima(sub, _SEED_NEIGHBORS)
    r1 = K.nearest_neighbor_scan(sub, sub_pop, K.chunk_bounds(idx.size, 1), block,
                                 seed, 0, 1)[0]
    return cutoff_threshold(Fraction(int(r1.sum()), idx.size), inclusive)


def build_wfn(unique: DedupDataset | SnapshotDataset | np.ndarray, *,
              inclusive: bool = False, block: int = 256,
              n_jobs: int | None = None) -> WfnResult:
    """Nearest-neighbor distances, cutoff and degrees of unique snapshots.

    Rows are sorted by popcount so the popcount difference prunes pairs.
    The nearest-neighbor scan gives every node's ``r1`` and hence
    ``R = mean(r1)`` (kept exact as a fraction); it also records the pairs
    below a threshold estimated from a subsample, which yields the degrees
    (partners with ``D < R``, or ``D <= R`` when ``inclusive``) whenever the
    estimate covers the true threshold.  Otherwise a second scan counts
    them.  The result is independent of ``n_jobs``.
    """
    if isinstance(unique, SnapshotDataset):
        unique = deduplicate(unique)
    X = unique.words if isinstance(unique, DedupDataset) else np.asarray(unique)
    X = np.ascontiguousarray(X, dtype=np.uint64)
    if X.ndim != 2:
        raise WfnError(f"expected a 2D array of packed snapshots, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise WfnError(f"need at least 2 unique snapshots, got {n}")
    threads = _resolve_threads(n_jobs)
    block = int(block)
    if block < 1:
        raise WfnError(f"block size must be positive, got {block}")
    old = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        pop = K.row_popcounts(X)
        order = np.argsort(pop, kind="stable")
        Xs, ps = np.ascontiguousarray(X[order]), pop[order]
        bounds = K.chunk_bounds(n, 4 * threads)
        n_chunks = bounds.size - 1
        guess = _threshold_guess(Xs, ps, inclusive, block)
        capacity = max(4096, 8 * n // n_chunks) if guess > 0 else 1
        seed = K.seed_minima(Xs, _SEED_NEIGHBORS)
        r1s, pi, pj, pd, counts = K.nearest_neighbor_scan(Xs, ps, bounds, block, seed,
                                                          guess, capacity)
        if np.any(r1s == 0):
            raise WfnError("duplicate snapshots present; deduplicate first")
        cutoff = Fraction(int(r1s.sum()), n)
        threshold = cutoff_threshold(cutoff, inclusive)
        if threshold <= guess and counts.max() <= capacity:
            keep = [slice(0, int(k)) for k in counts]
            degs = K.count_pairs_below(
                n,
                np.concatenate([pi[c, keep[c]] for c in range(n_chunks)]),
                np.concatenate([pj[c, keep[c]] for c in range(n_chunks)]),
                np.concatenate([pd[c, keep[c]] for c in range(n_chunks)]),
                threshold,
            )
        else:
            degs = K.threshold_degrees(Xs, ps, bounds, block, threshold)
    finally:
        numba.set_num_threads(old)
    r1 = np.empty(n, dtype=np.int64)
    degrees = np.empty(n, dtype=np.int64)
    r1[order] = r1s
    degrees[order] = degs
    return WfnResult(r1, cutoff, degrees, inclusive)


def degree_samples(result: WfnResult) -> list[int]:
    return [int(k) for k in result.degrees]
