import numpy as np
import pytest
from sklearn.base import clone

from snaprg.dataset import SnapshotDataset
from snaprg.estimators import PowerLawDegreeFit, SnapshotRG, WaveFunctionNetwork
from snaprg.lattice import build_lattice, decimation_mask
from snaprg.rg import rg_flow
from snaprg.wfn import build_wfn

from test_stats import power_law_degrees


@pytest.mark.parametrize("est", [SnapshotRG(n_steps=2), WaveFunctionNetwork(block_size=8),
                                 PowerLawDegreeFit(ratio=1.5, window=(1, 50))])
def test_params_round_trip(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    assert twin is not est


def test_snapshot_rg_on_arrays(lat4, rng):
    spins = rng.choice([-1, 1], size=(20, 16))
    out = SnapshotRG(n_steps=2, lattice=lat4).fit_transform(spins)
    assert np.array_equal(out, spins[:, decimation_mask(lat4, 2).retained])
    bits = (spins > 0).astype(int)
    assert np.array_equal(SnapshotRG(1, lattice=lat4).fit_transform(bits),
                          spins[:, decimation_mask(lat4, 1).retained])


def test_snapshot_rg_on_datasets(random_dataset):
    ds = random_dataset(10, lattice=build_lattice(2, [8, 8]))
    rg = SnapshotRG(n_steps=3).fit(ds)
    out = rg.transform(ds)
    assert out.n_steps_applied == 3
    assert np.array_equal(out.words, rg_flow(ds, 3)[3].words)
    assert rg.mask_.n_steps == 3


def test_snapshot_rg_errors(lat4, rng):
    with pytest.raises(ValueError):
        SnapshotRG(n_steps=9, lattice=lat4).fit(np.ones((2, 16)))
    with pytest.raises(ValueError):
        SnapshotRG(n_steps=1).fit(np.ones((2, 16)))
    with pytest.raises(ValueError):
        SnapshotRG(n_steps=1, lattice=lat4).fit(np.full((2, 16), 3))
    with pytest.raises(Exception):
        SnapshotRG(n_steps=1, lattice=lat4).transform(np.ones((2, 16)))


def test_wfn_estimator(lat4, rng):
    spins = rng.choice([-1, 1], size=(60, 16))
    spins = np.concatenate([spins, spins[:5]])
    est = WaveFunctionNetwork(lattice=lat4).fit(spins)
    ref = build_wfn(SnapshotDataset.from_spins(lat4, spins))
    assert np.array_equal(est.degrees_, ref.degrees)
    assert est.cutoff_ == ref.cutoff
    assert est.multiplicities_.sum() == 65
    assert est.n_nodes_ == ref.n_nodes


def test_power_law_estimator():
    k = power_law_degrees(0.75, 100000, seed=1)
    est = PowerLawDegreeFit().fit(k)
    assert est.gamma_ == pytest.approx(0.75, abs=0.03)
    lo, hi = est.window_
    mid = np.sqrt(lo * hi)
    assert est.predict([mid, 2 * mid])[0] / est.predict([mid, 2 * mid])[1] == \
        pytest.approx(2 ** est.gamma_)
    with pytest.raises(ValueError):
        PowerLawDegreeFit().fit([1.5, 2])
    with pytest.raises(ValueError):
        PowerLawDegreeFit().fit([])
