"""Input checks shared by the estimators, in the spirit of ``check_array``."""

from __future__ import annotations

import numpy as np

from .dataset import DatasetError, SnapshotDataset
from .lattice import LatticeSpec


def check_snapshots(X, lattice: LatticeSpec | None = None,
                    n_steps_applied: int = 0) -> SnapshotDataset:
    """Coerce ``X`` to a :class:`SnapshotDataset`.

    Accepts a dataset unchanged, or a 2D array of spins in {-1, +1} or bits
    in {0, 1} (one snapshot per row, row-major site order), which needs
    ``lattice``.
    """
    if isinstance(X, SnapshotDataset):
        if lattice is not None and X.lattice != lattice:
            raise DatasetError("dataset lattice differs from the estimator lattice")
        return X
    if lattice is None:
        raise DatasetError("array input needs a lattice")
    arr = np.asarray(X)
    if arr.ndim != 2:
        raise DatasetError(f"expected a 2D array of snapshots, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise DatasetError("no snapshots")
    values = np.unique(arr)
    if np.all(np.isin(values, (-1, 1))):
        bits = arr > 0
    elif np.all(np.isin(values, (0, 1))):
        bits = arr.astype(bool)
    else:
        raise DatasetError(f"snapshot entries must be +-1 or 0/1, found {values[:5]}")
    return SnapshotDataset.from_spins(lattice, np.where(bits, 1, -1), n_steps_applied)


def check_degrees(degrees) -> np.ndarray:
    k = np.asarray(degrees)
    if k.ndim == 2 and 1 in k.shape:
        k = k.ravel()
    if k.ndim != 1 or k.size == 0:
        raise ValueError("degrees must be a nonempty 1D sequence")
    if not np.issubdtype(k.dtype, np.integer):
        if not np.all(np.equal(np.mod(k, 1), 0)):
            raise ValueError("degrees must be integers")
        k = k.astype(np.int64)
    if np.any(k < 0):
        raise ValueError("degrees must be non-negative")
    return k.astype(np.int64)
