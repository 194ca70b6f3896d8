import numpy as np
import pytest

from snaprg._bits import pack_bits
from snaprg.dataset import SnapshotDataset, deduplicate
from snaprg.lattice import build_lattice, decimation_mask, max_rg_steps
from snaprg.mcmc import IsingModel, SamplerConfig, exact_enumeration, sample_snapshots
from snaprg.rg import FrameMismatchError, apply_rg, rg_flow, step_positions


def test_projection_2x2():
    lat = build_lattice(2, [2, 2])
    # site order (0,0), (1,0), (0,1), (1,1)
    ds = SnapshotDataset.from_spins(lat, [[1, -1, 1, -1]])
    out = apply_rg(ds, decimation_mask(lat, 1))
    assert out.n_steps_applied == 1
    assert decimation_mask(lat, 1).retained.tolist() == [0, 3]
    assert out.spins().tolist() == [[1, -1]]


def test_uniform_marginal_is_uniform():
    lat = build_lattice(2, [2, 2])
    bits = (np.arange(16)[:, None] >> np.arange(4)) & 1
    out = apply_rg(SnapshotDataset(lat, 0, pack_bits(bits)), decimation_mask(lat, 1))
    assert np.all(deduplicate(out).multiplicities == 4)


def test_flow_lengths():
    lat = build_lattice(2, [256, 256])
    ds = SnapshotDataset(lat, 0, np.zeros((3, 1024), dtype=np.uint64))
    flow = rg_flow(ds, 4)
    assert [d.n_bits for d in flow.steps] == [65536, 32768, 16384, 8192, 4096]
    assert all(d.n_snapshots == 3 for d in flow.steps)


def test_flow_zero_is_identity(random_dataset):
    ds = random_dataset(5)
    flow = rg_flow(ds, 0)
    assert len(flow) == 1 and flow[0] is ds


@pytest.mark.parametrize("dim, L", [(2, 8), (2, 16), (3, 8)])
def test_flow_matches_sequential_and_direct(rng, dim, L):
    lat = build_lattice(dim, [L] * dim)
    spins = rng.choice([-1, 1], size=(20, lat.n_sites))
    ds = SnapshotDataset.from_spins(lat, spins)
    n_max = max_rg_steps(lat) - 1
    flow = rg_flow(ds, n_max)
    seq = ds
    for k in range(1, n_max + 1):
        seq = apply_rg(seq, decimation_mask(lat, k))
        assert np.array_equal(seq.words, flow[k].words)
        # retained bits are untouched by the projection
        direct = spins[:, decimation_mask(lat, k).retained]
        assert np.array_equal(flow[k].spins(), direct)


def test_flow_from_intermediate_step(random_dataset):
    ds = random_dataset(10, lattice=build_lattice(2, [8, 8]))
    two = rg_flow(ds, 3)
    again = rg_flow(two[1], 2)
    assert np.array_equal(again[2].words, two[3].words)


def test_frame_mismatch(random_dataset, lat4):
    ds = random_dataset(4)
    with pytest.raises(FrameMismatchError):
        apply_rg(ds, decimation_mask(lat4, 2))
    with pytest.raises(FrameMismatchError):
        apply_rg(ds, decimation_mask(build_lattice(2, [4, 8]), 1))
    with pytest.raises(FrameMismatchError):
        step_positions(decimation_mask(lat4, 2), decimation_mask(lat4, 1))


def test_deterministic(random_dataset, lat4):
    ds = random_dataset(30)
    a = apply_rg(ds, decimation_mask(lat4, 1))
    b = apply_rg(ds, decimation_mask(lat4, 1))
    assert np.array_equal(a.words, b.words)


def test_site_magnetization_preserved(random_dataset, lat4):
    ds = random_dataset(200)
    out = apply_rg(ds, decimation_mask(lat4, 1))
    kept = decimation_mask(lat4, 1).retained
    assert np.array_equal(out.bits().sum(axis=0), ds.bits()[:, kept].sum(axis=0))


def test_marginal_matches_exact_small(lat4):
    model = IsingModel(lat4)
    ds = sample_snapshots(model, SamplerConfig(beta=0.4, n_snapshots=100000, n_therm=200,
                                               seed=4))
    mask = decimation_mask(lat4, 1)
    out = apply_rg(ds, mask)
    emp = np.bincount(out.words[:, 0].astype(np.int64), minlength=256) / out.n_snapshots
    exact = exact_enumeration(model, 0.4).marginal(mask.retained)
    assert exact.sum() == pytest.approx(1.0)
    # 256 cells at 1e5 samples: expected TV about 0.02
    assert 0.5 * np.abs(emp - exact).sum() < 0.035
