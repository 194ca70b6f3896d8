"""Hypercubic lattice geometry, neighbor tables and decimation masks.

Sites are indexed row-major with the x axis fastest:
``index = x + Lx * (y + Ly * z)``.  All boundaries are periodic.

A decimation step keeps half of the currently retained sites.  On the square
lattice the retained sets alternate between a rotated checkerboard
(primitive vectors ``(1, 1), (1, -1)`` times ``2**k``) and an axis-aligned
square lattice with spacing ``2**k``.  In three dimensions the cycle is
simple cubic -> face-centred -> body-centred -> simple cubic with doubled
spacing; the first step is the parity rule ``x + y + z`` even.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class LatticeError(ValueError):
    """Raised for invalid lattice geometry or decimation requests."""


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic hypercubic lattice.

    Parameters
    ----------
    dimension : int
        Spatial dimension, 2 or 3.
    lengths : tuple of int
        Sites per axis, x first.
    """

    dimension: int
    lengths: tuple[int, ...]

    @property
    def n_sites(self) -> int:
        return math.prod(self.lengths)

    @cached_property
    def _strides(self) -> np.ndarray:
        return np.cumprod((1,) + self.lengths[:-1]).astype(np.int64)

    def index(self, coords) -> np.ndarray | int:
        """Linear index of coordinates (wrapped periodically)."""
        c = np.mod(np.asarray(coords, dtype=np.int64), self.lengths)
        out = c @ self._strides
        return int(out) if np.ndim(out) == 0 else out

    def coords(self, index) -> np.ndarray:
        """Coordinates of linear index (or array of indices), shape (..., d)."""
        idx = np.asarray(index, dtype=np.int64)
        return np.stack(
            [(idx // s) % n for s, n in zip(self._strides, self.lengths)], axis=-1
        )

    @cached_property
    def all_coords(self) -> np.ndarray:
        return self.coords(np.arange(self.n_sites))

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "lengths": list(self.lengths)}


def build_lattice(dimension: int, lengths) -> LatticeSpec:
    """Validate and build a :class:`LatticeSpec`.

    Lengths must be even so that every parity mask keeps exactly half the
    sites; a length of 2 is accepted for tiny verification systems.
    """
    if dimension not in (2, 3):
        raise LatticeError(f"dimension must be 2 or 3, got {dimension}")
    lengths = tuple(int(n) for n in lengths)
    if len(lengths) != dimension:
        raise LatticeError(
            f"expected {dimension} lengths, got {len(lengths)}: {list(lengths)}"
        )
    for n in lengths:
        if n < 2 or n % 2:
            raise LatticeError(f"lengths must be even and >= 2, got {list(lengths)}")
    return LatticeSpec(dimension, lengths)


@dataclass(frozen=True, eq=False)
class NeighborTable:
    """Forward neighbors: each unordered bond is listed once, at its lower end.

    ``forward[i]`` holds the neighbors of site ``i`` in the +axis (order 1)
    or +diagonal (order 2) directions.
    """

    lattice: LatticeSpec
    order: int
    forward: np.ndarray
    shifts: np.ndarray = field(repr=False)

    @property
    def n_bonds(self) -> int:
        return self.forward.size

    def full_adjacency(self) -> np.ndarray:
        """Both bond directions per site, shape (N, 2 * z_forward).

        On an L=2 axis the forward and backward neighbor coincide; both
        entries are kept so the bond multiplicity matches the bond sum.
        """
        c = self.lattice.all_coords
        back = np.stack([self.lattice.index(c - s) for s in self.shifts], axis=1)
        return np.ascontiguousarray(np.concatenate([self.forward, back], axis=1))


def neighbor_table(lattice: LatticeSpec, order: int = 1) -> NeighborTable:
    if order not in (1, 2):
        raise LatticeError(f"neighbor order must be 1 or 2, got {order}")
    if order == 1:
        shifts = np.eye(lattice.dimension, dtype=np.int64)
    elif lattice.dimension == 2:
        shifts = np.array([[1, 1], [1, -1]], dtype=np.int64)
    else:
        raise LatticeError("next-nearest neighbors are only supported in 2D")
    c = lattice.all_coords
    forward = np.stack([lattice.index(c + s) for s in shifts], axis=1)
    return NeighborTable(
        lattice, order, np.ascontiguousarray(forward, dtype=np.int64), shifts
    )


_FCC = np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1]], dtype=np.int64)
# x+y even, z even: the index-2 sublattice of FCC that still contains 2Z^3
_FCT = np.array([[1, 1, 0], [1, -1, 0], [0, 0, 2]], dtype=np.int64)
_ROT = np.array([[1, 1], [1, -1]], dtype=np.int64)


def sublattice_frame(dimension: int, n_steps: int) -> np.ndarray:
    """Primitive vectors (rows) of the sublattice retained after ``n_steps``."""
    if n_steps < 0:
        raise LatticeError("n_steps must be non-negative")
    period = dimension
    k, r = divmod(n_steps, period)
    if r == 0:
        base = np.eye(dimension, dtype=np.int64)
    elif dimension == 2:
        base = _ROT
    else:
        base = _FCC if r == 1 else _FCT
    return (2**k) * base


def _frame_coefficients(frame: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Coefficients of points in the frame basis (floats, integral on the lattice)."""
    return np.linalg.solve(frame.T.astype(float), points.T.astype(float)).T


def _is_integral(x: np.ndarray) -> np.ndarray:
    return np.all(np.abs(x - np.rint(x)) < 1e-9, axis=-1)


def max_rg_steps(lattice: LatticeSpec) -> int:
    """Largest admissible number of decimation steps for this lattice."""
    n = 0
    while True:
        try:
            _check_steps(lattice, n + 1)
        except LatticeError:
            return n
        n += 1


def _check_steps(lattice: LatticeSpec, n_steps: int) -> np.ndarray:
    if n_steps < 0:
        raise LatticeError("n_steps must be non-negative")
    if lattice.dimension == 2 and n_steps > math.log2(min(lattice.lengths)) + 1:
        raise LatticeError(
            f"{n_steps} RG steps exceed the capacity of lattice {list(lattice.lengths)}"
        )
    if lattice.n_sites % (2**n_steps):
        raise LatticeError(f"2**{n_steps} does not divide N={lattice.n_sites}")
    frame = sublattice_frame(lattice.dimension, n_steps)
    periods = np.diag(lattice.lengths).astype(np.int64)
    # the sublattice must close on the torus
    if not np.all(_is_integral(_frame_coefficients(frame, periods))):
        raise LatticeError(
            f"{n_steps} RG steps are not periodic on lattice {list(lattice.lengths)}"
        )
    return frame


@dataclass(frozen=True, eq=False)
class SiteMask:
    """Sites retained after ``n_steps`` composed decimation steps."""

    lattice: LatticeSpec
    n_steps: int
    retained: np.ndarray
    frame: np.ndarray = field(repr=False)

    @property
    def n_retained(self) -> int:
        return int(self.retained.size)

    @property
    def scale(self) -> float:
        """Lattice-spacing growth relative to the original lattice."""
        return 2.0 ** (self.n_steps / self.lattice.dimension)

    def position_map(self) -> np.ndarray:
        """Original linear index -> position in ``retained`` (-1 if decimated)."""
        pos = np.full(self.lattice.n_sites, -1, dtype=np.int64)
        pos[self.retained] = np.arange(self.retained.size)
        return pos

    def extent(self, axis: int) -> int:
        """Number of steps along primitive vector ``axis`` before wrapping."""
        v = self.frame[axis]
        m = 1
        for comp, n in zip(v, self.lattice.lengths):
            comp = int(comp) % n
            m = math.lcm(m, n // math.gcd(comp, n)) if comp else m
        return m


def decimation_mask(lattice: LatticeSpec, n_steps: int) -> SiteMask:
    """Mask of the sites kept after ``n_steps`` decimation steps.

    Raises
    ------
    LatticeError
        If the step count is too large for the lattice.
    """
    frame = _check_steps(lattice, n_steps)
    coeff = _frame_coefficients(frame, lattice.all_coords)
    retained = np.flatnonzero(_is_integral(coeff)).astype(np.int64)
    if retained.size * 2**n_steps != lattice.n_sites:
        raise LatticeError(
            f"mask keeps {retained.size} sites, expected N/2**{n_steps}"
        )
    return SiteMask(lattice, n_steps, retained, frame)


def retained_coordinates(mask: SiteMask) -> list[tuple[int, tuple[int, ...]]]:
    """Retained sites with their integer coordinates in the current frame."""
    pts = mask.lattice.coords(mask.retained)
    coeff = np.rint(_frame_coefficients(mask.frame, pts)).astype(np.int64)
    return [(int(i), tuple(int(c) for c in row)) for i, row in zip(mask.retained, coeff)]
