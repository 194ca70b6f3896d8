"""scikit-learn style wrappers: parameters in ``__init__``, results in
trailing-underscore attributes, ``get_params``/``set_params`` for free."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import SnapshotDataset, deduplicate
from .lattice import decimation_mask, max_rg_steps
from .rg import rg_flow
from .stats import fit_power_law, log_binned_histogram
from .validation import check_degrees, check_snapshots
from .wfn import build_wfn


class SnapshotRG(TransformerMixin, BaseEstimator):
    """Decimate snapshots by ``n_steps`` SnapshotRG steps.

    Parameters
    ----------
    n_steps : int
        Number of decimation steps applied by ``transform``.
    lattice : LatticeSpec, optional
        Needed only when snapshots are passed as plain arrays.

    Attributes
    ----------
    lattice_ : LatticeSpec
    mask_ : SiteMask
        Composed mask from the input's step count to the output's.
    """

    def __init__(self, n_steps=1, lattice=None):
        self.n_steps = n_steps
        self.lattice = lattice

    def fit(self, X, y=None):
        ds = check_snapshots(X, self.lattice)
        target = ds.n_steps_applied + self.n_steps
        if self.n_steps < 0 or target > max_rg_steps(ds.lattice):
            raise ValueError(
                f"{self.n_steps} steps after {ds.n_steps_applied} exceed the capacity "
                f"of lattice {list(ds.lattice.lengths)}"
            )
        self.lattice_ = ds.lattice
        self.input_steps_ = ds.n_steps_applied
        self.mask_ = decimation_mask(ds.lattice, target)
        return self

    def transform(self, X):
        check_is_fitted(self, "mask_")
        ds = check_snapshots(X, self.lattice_, self.input_steps_)
        if ds.n_steps_applied != self.input_steps_:
            raise ValueError("input step count differs from the one seen in fit")
        out = rg_flow(ds, self.n_steps)[-1]
        if isinstance(X, SnapshotDataset):
            return out
        return out.spins()


class WaveFunctionNetwork(BaseEstimator):
    """Degrees of the wave function network of a snapshot set.

    Duplicates are removed before construction.

    Attributes
    ----------
    degrees_ : ndarray
        Degree of every unique snapshot, in first-occurrence order.
    r1_ : ndarray
        Nearest-neighbor Hamming distance of every unique snapshot.
    cutoff_ : fractions.Fraction
        Mean of ``r1_``.
    multiplicities_ : ndarray
    n_nodes_ : int
    """

    def __init__(self, cutoff_inclusive=False, block_size=256, n_jobs=None, lattice=None):
        self.cutoff_inclusive = cutoff_inclusive
        self.block_size = block_size
        self.n_jobs = n_jobs
        self.lattice = lattice

    def fit(self, X, y=None):
        ds = check_snapshots(X, self.lattice)
        unique = deduplicate(ds)
        result = build_wfn(unique, inclusive=self.cutoff_inclusive,
                           block=self.block_size, n_jobs=self.n_jobs)
        self.result_ = result
        self.degrees_ = result.degrees
        self.r1_ = result.r1
        self.cutoff_ = result.cutoff
        self.multiplicities_ = unique.multiplicities
        self.n_nodes_ = result.n_nodes
        return self


class PowerLawDegreeFit(BaseEstimator):
    """Log-binned power-law fit ``P_k ~ k**-gamma`` of a degree sample.

    Attributes
    ----------
    histogram_ : DegreeHistogram
    fit_ : PowerLawFit
    gamma_, gamma_stderr_ : float
    window_ : tuple of int
    """

    def __init__(self, ratio=1.3, window=None, min_decades=1.0, min_r2=0.98, min_bins=5):
        self.ratio = ratio
        self.window = window
        self.min_decades = min_decades
        self.min_r2 = min_r2
        self.min_bins = min_bins

    def fit(self, X, y=None):
        k = check_degrees(X)
        self.histogram_ = log_binned_histogram(k, self.ratio)
        self.fit_ = fit_power_law(self.histogram_, self.window,
                                  min_decades=self.min_decades, min_r2=self.min_r2,
                                  min_bins=self.min_bins)
        self.gamma_ = self.fit_.gamma
        self.gamma_stderr_ = self.fit_.stderr
        self.window_ = self.fit_.window
        return self

    def predict(self, k):
        """Fitted density at degree(s) ``k``."""
        check_is_fitted(self, "fit_")
        k = np.asarray(k, dtype=float)
        return 10.0 ** self.fit_.log10_amplitude * k ** (-self.gamma_)
