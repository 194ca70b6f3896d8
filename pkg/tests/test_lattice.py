import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snaprg.lattice import (
    LatticeError,
    build_lattice,
    decimation_mask,
    max_rg_steps,
    neighbor_table,
    retained_coordinates,
)


@pytest.mark.parametrize("dim, lengths, n", [(2, [4, 4], 16), (3, [4, 4, 4], 64),
                                             (2, [8, 4], 32)])
def test_site_count(dim, lengths, n):
    assert build_lattice(dim, lengths).n_sites == n


@pytest.mark.parametrize("dim, lengths", [(2, [5, 4]), (1, [4]), (4, [4] * 4),
                                          (2, [3, 4]), (2, [4, 4, 4]), (2, [0, 4])])
def test_invalid_lattice(dim, lengths):
    with pytest.raises(LatticeError):
        build_lattice(dim, lengths)


@given(st.sampled_from([(2, (4, 6)), (2, (8, 8)), (3, (4, 4, 6)), (3, (6, 4, 4))]))
def test_index_coordinate_bijection(case):
    lat = build_lattice(*case)
    idx = np.arange(lat.n_sites)
    assert np.array_equal(lat.index(lat.coords(idx)), idx)
    # x runs fastest
    assert lat.index((1,) + (0,) * (lat.dimension - 1)) == 1
    assert lat.index((0, 1) + (0,) * (lat.dimension - 2)) == lat.lengths[0]


@pytest.mark.parametrize("dim, order, bonds, degree", [(2, 1, 32, 4), (2, 2, 32, 4),
                                                       (3, 1, 192, 6)])
def test_neighbor_tables(dim, order, bonds, degree):
    lat = build_lattice(dim, [4] * dim)
    table = neighbor_table(lat, order)
    assert table.n_bonds == bonds
    adj = table.full_adjacency()
    assert adj.shape == (lat.n_sites, degree)
    for i, row in enumerate(adj):
        assert len(set(row.tolist())) == degree
        for j in row:
            assert i in adj[j]


def test_nnn_is_diagonal(lat4):
    table = neighbor_table(lat4, 2)
    nbrs = set(table.full_adjacency()[lat4.index((0, 0))].tolist())
    assert nbrs == {lat4.index(c) for c in [(1, 1), (1, 3), (3, 1), (3, 3)]}


def test_nnn_rejected_in_3d():
    with pytest.raises(LatticeError):
        neighbor_table(build_lattice(3, [4, 4, 4]), 2)


def test_mask_step1_checkerboard(lat4):
    m = decimation_mask(lat4, 1)
    xy = lat4.coords(m.retained)
    assert m.n_retained == 8
    assert np.all(xy.sum(axis=1) % 2 == 0)
    assert np.all(np.diff(m.retained) > 0)


def test_mask_step2(lat4):
    m = decimation_mask(lat4, 2)
    got = {tuple(c) for c in lat4.coords(m.retained)}
    assert got == {(0, 0), (0, 2), (2, 0), (2, 2)}


def test_mask_step0_identity(lat4):
    m = decimation_mask(lat4, 0)
    assert np.array_equal(m.retained, np.arange(16))
    assert np.array_equal(m.frame, np.eye(2))


@pytest.mark.parametrize("dim, L", [(2, 16), (2, 8), (3, 8), (2, 32)])
def test_mask_sizes_and_composition(dim, L):
    lat = build_lattice(dim, [L] * dim)
    prev = set(range(lat.n_sites))
    for n in range(max_rg_steps(lat) + 1):
        m = decimation_mask(lat, n)
        assert m.n_retained * 2**n == lat.n_sites
        assert set(m.retained.tolist()) <= prev
        prev = set(m.retained.tolist())
    with pytest.raises(LatticeError):
        decimation_mask(lat, max_rg_steps(lat) + 1)


def test_second_step_is_checkerboard_of_first(lat4):
    # decimating the (x+y) even sites on their rotated frame gives x, y even
    m1, m2 = decimation_mask(lat4, 1), decimation_mask(lat4, 2)
    coords1 = dict(retained_coordinates(m1))
    kept = {i for i, (u, v) in coords1.items() if (u + v) % 2 == 0}
    assert kept == set(m2.retained.tolist())


def test_3d_parity_step():
    lat = build_lattice(3, [4, 4, 4])
    m = decimation_mask(lat, 1)
    assert np.all(lat.coords(m.retained).sum(axis=1) % 2 == 0)
    m3 = decimation_mask(lat, 3)
    assert np.all(lat.coords(m3.retained) % 2 == 0)


@pytest.mark.parametrize("n, site, expected", [(0, (3, 2), (3, 2)), (1, (1, 1), (1, 0)),
                                               (2, (2, 2), (1, 1))])
def test_retained_coordinates(lat4, n, site, expected):
    coords = dict(retained_coordinates(decimation_mask(lat4, n)))
    assert coords[lat4.index(site)] == expected


def test_frames():
    lat = build_lattice(2, [8, 8])
    assert np.array_equal(decimation_mask(lat, 1).frame, [[1, 1], [1, -1]])
    assert np.array_equal(decimation_mask(lat, 2).frame, [[2, 0], [0, 2]])
    assert decimation_mask(lat, 2).scale == pytest.approx(2.0)


@settings(max_examples=20)
@given(st.integers(2, 5).map(lambda k: 2 * k), st.integers(2, 5).map(lambda k: 2 * k))
def test_masks_halve_rectangular(lx, ly):
    lat = build_lattice(2, [lx, ly])
    for n in range(max_rg_steps(lat) + 1):
        assert decimation_mask(lat, n).n_retained == lat.n_sites >> n
