"""Correlation functions, log-binned degree histograms, power-law fits and
two-sample Kolmogorov-Smirnov distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .dataset import SnapshotDataset


class StatsError(ValueError):
    pass


class NoWindowError(StatsError):
    """No admissible power-law fit window."""


class NotExponentialError(StatsError):
    """Correlations show no exponential decay above the noise."""


def blocked_stderr(x, n_blocks: int = 100) -> float:
    """Standard error of the mean from contiguous block averages.

    Blocks absorb autocorrelation shorter than the block length.
    """
    x = np.asarray(x, dtype=float)
    n_blocks = min(n_blocks, x.size)
    if n_blocks < 2:
        return float("nan")
    means = np.array([b.mean() for b in np.array_split(x, n_blocks)])
    return float(means.std(ddof=1) / math.sqrt(n_blocks))


# ---------------------------------------------------------------- correlations


@dataclass(frozen=True, eq=False)
class CorrelationFunction:
    """``C(d)`` for ``d = 0..max_d`` in units of the current primitive vectors.

    ``scale`` is the lattice-spacing growth ``lambda**n`` of the source
    dataset; ``rescaled_eta`` is set once values have been multiplied by
    ``scale**eta``.
    """

    separations: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n_steps: int
    scale: float
    dimension: int
    n_snapshots: int
    rescaled_eta: float | None = None


@njit(cache=True)
def _correlation_sums(spins, targets, out):
    """out[r, d] = mean over sites and directions of s_i s_{i + d e}."""
    n_snap, n_sites = spins.shape
    n_dir, n_d, _ = targets.shape
    norm = 1.0 / (n_dir * n_sites)
    for r in range(n_snap):
        s = spins[r]
        for d in range(n_d):
            acc = 0
            for e in range(n_dir):
                t = targets[e, d]
                for i in range(n_sites):
                    acc += s[i] * s[t[i]]
            out[r, d] = acc * norm


def correlation_function(dataset: SnapshotDataset, max_d: int,
                         chunk: int = 2048) -> CorrelationFunction:
    """Translation- and direction-averaged spin-spin correlation.

    Separations run along each primitive vector of the current frame; the
    per-snapshot averages give the standard error.
    """
    mask = dataset.mask()
    lattice = dataset.lattice
    limit = min(mask.extent(a) for a in range(lattice.dimension)) // 2
    if max_d < 0 or max_d > limit:
        raise StatsError(f"max_d={max_d} exceeds half the current extent ({limit})")
    pos = mask.position_map()
    coords = lattice.coords(mask.retained)
    targets = np.empty((lattice.dimension, max_d + 1, mask.n_retained), dtype=np.int64)
    for a, e in enumerate(mask.frame):
        for d in range(max_d + 1):
            targets[a, d] = pos[lattice.index(coords + d * e)]
    per_snapshot = np.empty((dataset.n_snapshots, max_d + 1))
    for a in range(0, dataset.n_snapshots, chunk):
        sub = SnapshotDataset(lattice, dataset.n_steps_applied, dataset.words[a:a + chunk])
        _correlation_sums(sub.spins(), targets, per_snapshot[a:a + chunk])
    n = dataset.n_snapshots
    values = per_snapshot.mean(axis=0)
    values[0] = 1.0
    err = per_snapshot.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(max_d + 1)
    return CorrelationFunction(
        separations=np.arange(max_d + 1),
        values=values,
        stderr=err,
        n_steps=dataset.n_steps_applied,
        scale=mask.scale,
        dimension=lattice.dimension,
        n_snapshots=n,
    )


def rescale_correlation(corr: CorrelationFunction, eta: float) -> CorrelationFunction:
    """Multiply by ``lambda**(n * eta)``; separations stay in frame units.

    At criticality ``C_n(m) ~ (m lambda**n)**-eta``, so the rescaled curves
    of different steps fall onto the unrenormalized one.
    """
    factor = corr.scale**eta
    return replace(corr, values=corr.values * factor, stderr=corr.stderr * factor,
                   rescaled_eta=eta)


def correlation_length(corr: CorrelationFunction) -> float:
    """``xi = -1 / slope`` of ``log C(d)`` over the separations with signal.

    Uses ``d >= 1`` with ``C(d) > 3 stderr``; a weighted fit when errors are
    available.
    """
    d = corr.separations
    c = corr.values
    err = corr.stderr
    ok = (d >= 1) & (c > 3 * err) & (c > 0)
    if ok.sum() < 2:
        raise NotExponentialError("fewer than two separations carry signal above noise")
    x, y = d[ok].astype(float), np.log(c[ok])
    # weights 1/sigma of log C; uniform when errors are absent
    e = err[ok]
    w = c[ok] / e if np.all(e > 0) else np.ones_like(x)
    slope, _ = np.polyfit(x, y, 1, w=w)
    if slope >= 0:
        raise NotExponentialError(f"correlations do not decay (slope {slope:.3g})")
    return float(-1.0 / slope)


# ------------------------------------------------------------ degree histogram


@dataclass(frozen=True, eq=False)
class DegreeHistogram:
    """Log-binned degree density; bin ``j`` covers integers in
    ``[edges[j], edges[j+1])``."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    centers: np.ndarray
    n_zero: int
    n_total: int
    ratio: float

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


def log_bin_edges(k_max: int, ratio: float) -> np.ndarray:
    """Integer edges ``ceil(ratio**m)`` without repeats; the last edge is
    clipped to ``k_max + 1`` so no bin reaches past the observed maximum."""
    edges = [1]
    m = 1
    while edges[-1] <= k_max:
        e = math.ceil(ratio**m - 1e-12)
        if e > edges[-1]:
            edges.append(min(e, k_max + 1))
        m += 1
    return np.asarray(edges, dtype=np.int64)


def log_binned_histogram(degrees, ratio: float = 1.3) -> DegreeHistogram:
    """Histogram with geometrically growing integer bins starting at k=1.

    Degree-0 nodes are counted in ``n_zero`` and excluded from the bins and
    the normalization.
    """
    k = np.asarray(degrees, dtype=np.int64)
    if k.size == 0:
        raise StatsError("empty degree list")
    if ratio <= 1:
        raise StatsError(f"bin ratio must exceed 1, got {ratio}")
    if np.any(k < 0):
        raise StatsError("degrees must be non-negative")
    positive = k[k > 0]
    n_zero = int(k.size - positive.size)
    if positive.size == 0:
        raise StatsError("all degrees are zero; nothing to bin")
    edges = log_bin_edges(int(positive.max()), ratio)
    counts, _ = np.histogram(positive, bins=edges)
    widths = np.diff(edges)
    density = counts / (positive.size * widths)
    # geometric mean of the first and last integer in each bin
    centers = np.sqrt(edges[:-1] * (edges[1:] - 1).astype(float))
    return DegreeHistogram(edges, counts, density, centers, n_zero, int(k.size), ratio)


# -------------------------------------------------------------- power-law fits


@dataclass(frozen=True)
class PowerLawFit:
    """``P_k ~ k**-gamma`` over the integer degree window ``[k_low, k_high]``."""

    gamma: float
    stderr: float
    k_low: int
    k_high: int
    r2: float
    n_bins: int
    log10_amplitude: float = 0.0
    bins: tuple = field(repr=False, default=())

    @property
    def window(self) -> tuple[int, int]:
        return (self.k_low, self.k_high)

    @property
    def decades(self) -> float:
        return math.log10(self.k_high / self.k_low)


def _wls(x, y, w):
    W = w.sum()
    xm, ym = (w @ x) / W, (w @ y) / W
    sxx = w @ (x - xm) ** 2
    slope = (w @ ((x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    resid = y - intercept - slope * x
    ss_res = w @ resid**2
    ss_tot = w @ (y - ym) ** 2
    dof = max(x.size - 2, 1)
    stderr = math.sqrt(ss_res / dof / sxx)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return slope, intercept, stderr, r2


def _fit_bins(hist: DegreeHistogram, idx: np.ndarray) -> PowerLawFit:
    x = np.log10(hist.centers[idx])
    y = np.log10(hist.density[idx])
    w = hist.counts[idx].astype(float)
    slope, intercept, stderr, r2 = _wls(x, y, w)
    return PowerLawFit(
        gamma=float(-slope),
        stderr=float(stderr),
        k_low=int(hist.edges[idx[0]]),
        k_high=int(hist.edges[idx[-1] + 1] - 1),
        r2=float(r2),
        n_bins=int(idx.size),
        log10_amplitude=float(intercept),
        bins=tuple(int(i) for i in idx),
    )


def fit_power_law(hist: DegreeHistogram, window=None, *, min_decades: float = 1.0,
                  min_r2: float = 0.98, min_bins: int = 5) -> PowerLawFit:
    """Weighted least squares of log density against log bin center.

    Bin weights are the bin counts (Poisson variance of the log density).
    Without ``window`` the widest run of consecutive nonempty bins spanning
    at least ``min_decades`` with ``R^2 >= min_r2`` is chosen.

    Raises
    ------
    NoWindowError
        If no admissible window exists.
    """
    nonempty = hist.counts > 0
    if window is not None:
        k_low, k_high = window
        if not k_low < k_high:
            raise NoWindowError(f"invalid window {window}")
        idx = np.flatnonzero(nonempty & (hist.centers >= k_low) & (hist.centers <= k_high))
        if idx.size < min_bins:
            raise NoWindowError(
                f"window {window} holds {idx.size} nonempty bins, need {min_bins}"
            )
        return _fit_bins(hist, idx)

    runs = []
    start = None
    for j, ok in enumerate(np.append(nonempty, False)):
        if ok and start is None:
            start = j
        elif not ok and start is not None:
            runs.append((start, j))
            start = None
    best = None
    best_key = None
    for a0, a1 in runs:
        for i in range(a0, a1):
            for j in range(i + min_bins, a1 + 1):
                idx = np.arange(i, j)
                span = math.log10((hist.edges[j] - 1) / hist.edges[i])
                if span < min_decades:
                    continue
                fit = _fit_bins(hist, idx)
                if fit.r2 < min_r2:
                    continue
                key = (span, fit.n_bins, fit.r2)
                if best_key is None or key > best_key:
                    best, best_key = fit, key
    if best is None:
        raise NoWindowError(
            f"no window of >= {min_bins} bins spanning {min_decades} decade(s) "
            f"with R^2 >= {min_r2}"
        )
    return best


# ------------------------------------------------------------------ KS distance


@dataclass(frozen=True)
class DistributionDistance:
    statistic: float
    n_a: int
    n_b: int

    def critical_value(self, alpha: float = 0.01) -> float:
        """Asymptotic two-sample KS critical value ``c(alpha) sqrt((n+m)/(n m))``."""
        c = math.sqrt(-0.5 * math.log(alpha / 2))
        return c * math.sqrt((self.n_a + self.n_b) / (self.n_a * self.n_b))


def ks_distance(degrees_a, degrees_b) -> DistributionDistance:
    """Two-sample Kolmogorov-Smirnov statistic ``sup |F_a - F_b|``."""
    a = np.sort(np.asarray(degrees_a, dtype=float))
    b = np.sort(np.asarray(degrees_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise StatsError("KS distance needs two nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return DistributionDistance(float(np.max(np.abs(fa - fb))), int(a.size), int(b.size))
