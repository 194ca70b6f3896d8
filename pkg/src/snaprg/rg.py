"""Decimation of snapshot datasets.

Each step keeps the bits of the sites retained by the next parity mask and
drops the rest.  Because every reduced snapshot is a deterministic
projection of a full one, the reduced dataset samples the exact marginal
distribution of the retained sites.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._bits import gather_bits, n_words
from .dataset import SnapshotDataset
from .lattice import SiteMask, decimation_mask


class FrameMismatchError(ValueError):
    """The mask does not describe the next step for this dataset."""


def step_positions(mask_from: SiteMask, mask_to: SiteMask) -> np.ndarray:
    """Bit positions, in the ``mask_from`` ordering, of the sites ``mask_to`` keeps."""
    pos = np.searchsorted(mask_from.retained, mask_to.retained)
    if np.any(pos >= mask_from.retained.size) or not np.array_equal(
        mask_from.retained[np.minimum(pos, mask_from.retained.size - 1)], mask_to.retained
    ):
        raise FrameMismatchError("target mask is not a subset of the current sites")
    return pos.astype(np.int64)


def apply_rg(dataset: SnapshotDataset, mask: SiteMask) -> SnapshotDataset:
    """One decimation step.

    ``mask`` must be the composed mask for ``dataset.n_steps_applied + 1``
    steps on the dataset's lattice.  The snapshot count is unchanged;
    duplicates created by the projection are kept.
    """
    if mask.lattice != dataset.lattice:
        raise FrameMismatchError("mask lattice differs from dataset lattice")
    if mask.n_steps != dataset.n_steps_applied + 1:
        raise FrameMismatchError(
            f"mask is for {mask.n_steps} steps but the dataset has "
            f"{dataset.n_steps_applied} applied; expected {dataset.n_steps_applied + 1}"
        )
    current = decimation_mask(dataset.lattice, dataset.n_steps_applied)
    positions = step_positions(current, mask)
    out = np.zeros((dataset.n_snapshots, n_words(positions.size)), dtype=np.uint64)
    gather_bits(dataset.words, positions, out)
    metadata = dict(dataset.metadata)
    metadata["rg_parent_steps"] = dataset.n_steps_applied
    return SnapshotDataset(dataset.lattice, mask.n_steps, out, metadata)


@dataclass(frozen=True, eq=False)
class RgFlow:
    """Datasets after 0..n_max steps; ``steps[k]`` has N / 2**k bits."""

    steps: tuple[SnapshotDataset, ...]
    masks: tuple[SiteMask, ...]

    def __len__(self):
        return len(self.steps)

    def __getitem__(self, k) -> SnapshotDataset:
        return self.steps[k]


def rg_flow(dataset: SnapshotDataset, n_max: int) -> RgFlow:
    """Apply :func:`apply_rg` repeatedly, recording every intermediate step."""
    start = dataset.n_steps_applied
    masks = [decimation_mask(dataset.lattice, start + k) for k in range(n_max + 1)]
    steps = [dataset]
    for mask in masks[1:]:
        steps.append(apply_rg(steps[-1], mask))
    return RgFlow(tuple(steps), tuple(masks))
