"""Monte Carlo sampling of classical Ising models and an exact oracle.

The Hamiltonian is

    H(s) = -J sum_<ij> s_i s_j + V

with the optional perturbations ``V1 = -J2 sum_<<ij>> s_i s_j`` (diagonal
next-nearest neighbors, ``J2 = J/10`` by default) and ``V2 = +h sum_i s_i``
(``h = J/100`` by default).  Units are ``k_B = J = 1`` unless overridden.
Snapshots are drawn from ``exp(-beta H) / Z`` with Metropolis sweeps mixed
with Wolff cluster updates.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _mc_kernels as K
from ._bits import n_words, unpack_bits
from .dataset import SnapshotDataset
from .lattice import LatticeSpec, build_lattice, neighbor_table

logger = logging.getLogger(__name__)

BETA_C_2D = 0.5 * math.log(1.0 + math.sqrt(2.0))
T_C_2D = 1.0 / BETA_C_2D
T_C_3D = 4.512

PERTURBATIONS = ("none", "nnn", "field")


class SamplerError(ValueError):
    """Invalid sampler configuration or an update the model does not allow."""


@dataclass(frozen=True)
class IsingModel:
    """Ferromagnetic Ising model on a periodic hypercubic lattice.

    Parameters
    ----------
    lattice : LatticeSpec
    J : float
        Nearest-neighbor coupling, must be positive.
    perturbation : {"none", "nnn", "field"}
    strength : float, optional
        ``J2`` for "nnn" (default ``J/10``) or ``h`` for "field" (default
        ``J/100``).
    """

    lattice: LatticeSpec
    J: float = 1.0
    perturbation: str = "none"
    strength: float | None = None

    def __post_init__(self):
        if not self.J > 0:
            raise SamplerError(f"coupling J must be positive, got {self.J}")
        if self.perturbation not in PERTURBATIONS:
            raise SamplerError(
                f"perturbation must be one of {PERTURBATIONS}, got {self.perturbation!r}"
            )
        if self.perturbation == "nnn" and self.lattice.dimension != 2:
            raise SamplerError("next-nearest-neighbor perturbation is 2D only")
        if self.strength is None and self.perturbation != "none":
            default = self.J / 10 if self.perturbation == "nnn" else self.J / 100
            object.__setattr__(self, "strength", default)
        if self.perturbation == "nnn" and self.strength < 0:
            raise SamplerError("next-nearest-neighbor coupling must be ferromagnetic")

    @property
    def J2(self) -> float:
        return float(self.strength) if self.perturbation == "nnn" else 0.0

    @property
    def h(self) -> float:
        return float(self.strength) if self.perturbation == "field" else 0.0

    @property
    def z2_symmetric(self) -> bool:
        return self.perturbation != "field"

    @cached_property
    def _tables(self):
        nn = neighbor_table(self.lattice, 1)
        n = self.lattice.n_sites
        if self.perturbation == "nnn":
            nnn = neighbor_table(self.lattice, 2)
            nnn_fwd, nnn_full = nnn.forward, nnn.full_adjacency()
        else:
            nnn_fwd = nnn_full = np.zeros((n, 0), dtype=np.int64)
        return nn.forward, nnn_fwd, nn.full_adjacency(), nnn_full

    def with_lattice(self, lattice: LatticeSpec) -> "IsingModel":
        return IsingModel(lattice, self.J, self.perturbation, self.strength)

    def describe(self) -> dict:
        return {
            "J": self.J,
            "perturbation": self.perturbation,
            "strength": self.strength,
            "J2": self.J2,
            "h": self.h,
        }


@dataclass(eq=False)
class SpinState:
    """A spin configuration with its cached total energy."""

    model: IsingModel
    spins: np.ndarray
    energy: float = field(default=np.nan)

    def __post_init__(self):
        self.spins = np.ascontiguousarray(self.spins, dtype=np.int8)
        if self.spins.shape != (self.model.lattice.n_sites,):
            raise SamplerError("spin array does not match the lattice")
        if np.isnan(self.energy):
            self.energy = energy(self.model, self)

    @classmethod
    def all_up(cls, model: IsingModel) -> "SpinState":
        return cls(model, np.ones(model.lattice.n_sites, dtype=np.int8))

    @classmethod
    def random(cls, model: IsingModel, rng: np.random.Generator) -> "SpinState":
        s = 2 * rng.integers(0, 2, size=model.lattice.n_sites, dtype=np.int8) - 1
        return cls(model, s.astype(np.int8))

    @property
    def magnetization(self) -> float:
        return float(self.spins.mean(dtype=np.float64))

    def bits(self) -> np.ndarray:
        return (self.spins > 0).astype(np.uint8)


def energy(model: IsingModel, state: SpinState) -> float:
    """Total energy, each bond counted once."""
    if state.model.lattice != model.lattice:
        raise SamplerError("state lattice does not match model lattice")
    nn_fwd, nnn_fwd, _, _ = model._tables
    return float(
        K.total_energy(state.spins, nn_fwd, nnn_fwd, model.J, model.J2, model.h)
    )


def _rng_state(rng: np.random.Generator) -> np.ndarray:
    s = rng.integers(0, np.iinfo(np.uint64).max, size=4, dtype=np.uint64, endpoint=True)
    if not s.any():
        s[0] = 1
    return s


def _chain_seed(seed: int, chain: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(chain)])


def metropolis_sweep(model: IsingModel, state: SpinState, beta: float,
                     rng: np.random.Generator) -> SpinState:
    """N single-spin Metropolis proposals, updating ``state`` in place."""
    if beta < 0:
        raise SamplerError("beta must be non-negative")
    _, _, nn, nnn = model._tables
    _, de = K.metropolis_sweep(state.spins, nn, nnn, model.J, model.J2, model.h,
                               float(beta), _rng_state(rng))
    state.energy += de
    return state


def wolff_update(model: IsingModel, state: SpinState, beta: float,
                 rng: np.random.Generator) -> tuple[SpinState, int]:
    """One Wolff cluster flip; returns the state and the cluster size.

    Clusters grow over both coupling classes with adhesion probability
    ``1 - exp(-2 beta J_c)``.  Models with a longitudinal field are rejected.
    """
    if not model.z2_symmetric:
        raise SamplerError("Wolff updates are invalid with a longitudinal field")
    if beta < 0:
        raise SamplerError("beta must be non-negative")
    _, _, nn, nnn = model._tables
    n = model.lattice.n_sites
    p_nn = -math.expm1(-2.0 * beta * model.J)
    p_nnn = -math.expm1(-2.0 * beta * model.J2)
    size, de = K.wolff_update(state.spins, nn, nnn, model.J, model.J2, p_nn, p_nnn,
                              _rng_state(rng), np.empty(n, dtype=np.int64),
                              np.zeros(n, dtype=np.int64), 1)
    state.energy += de
    return state, int(size)


@dataclass(frozen=True)
class SamplerConfig:
    """Markov-chain settings for :func:`sample_snapshots`.

    ``mix`` is the fraction of steps that are single Wolff updates; the rest
    are Metropolis sweeps.  The default 0.5 alternates one Wolff update with
    one sweep.  ``n_decor`` steps separate recorded snapshots.
    """

    beta: float
    n_snapshots: int
    n_therm: int = 1000
    n_decor: int = 10
    n_chains: int = 1
    mix: float = 0.5
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise SamplerError(f"sampler.beta must be finite and >= 0, got {self.beta}")
        for name in ("n_snapshots", "n_decor", "n_chains", "n_jobs"):
            if getattr(self, name) < 1:
                raise SamplerError(f"sampler.{name} must be positive")
        if self.n_therm < 0:
            raise SamplerError("sampler.n_therm must be non-negative")
        if not 0.0 <= self.mix <= 1.0:
            raise SamplerError(f"sampler.mix must lie in [0, 1], got {self.mix}")


def _run_one_chain(model: IsingModel, config: SamplerConfig, chain: int,
                   n_record: int) -> tuple[np.ndarray, dict]:
    ss = _chain_seed(config.seed, chain)
    init_seq, mc_seq = ss.spawn(2)
    state = SpinState.random(model, np.random.default_rng(init_seq))
    rng_state = mc_seq.generate_state(4, dtype=np.uint64)
    _, _, nn, nnn = model._tables
    out = np.zeros((n_record, n_words(model.lattice.n_sites)), dtype=np.uint64)
    e, acc, cl, nw = K.run_chain(
        state.spins, state.energy, nn, nnn, model.J, model.J2, model.h,
        float(config.beta), float(config.mix), rng_state,
        int(config.n_therm), int(config.n_decor), out,
    )
    stats = {
        "chain": chain,
        "acceptance_rate": None if np.isnan(acc) else float(acc),
        "mean_cluster_size": None if np.isnan(cl) else float(cl),
        "n_wolff": int(nw),
    }
    return out, stats


def sample_snapshots(model: IsingModel, config: SamplerConfig) -> SnapshotDataset:
    """Draw ``config.n_snapshots`` snapshots from the Boltzmann distribution.

    Chains start from independent random states and are merged in chain
    order, so the result depends only on the configuration and the seed.
    """
    if config.mix > 0 and not model.z2_symmetric:
        raise SamplerError(
            "sampler.mix requests Wolff updates, which are invalid with a field; "
            "use mix = 0"
        )
    base, extra = divmod(config.n_snapshots, config.n_chains)
    counts = [base + (c < extra) for c in range(config.n_chains)]
    jobs = [(c, k) for c, k in enumerate(counts) if k > 0]
    if config.n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(lambda ck: _run_one_chain(model, config, *ck), jobs))
    else:
        results = [_run_one_chain(model, config, c, k) for c, k in jobs]
    words = np.concatenate([r[0] for r in results], axis=0)
    chain_stats = [r[1] for r in results]
    for st in chain_stats:
        logger.info("chain %(chain)d: acceptance %(acceptance_rate)s, "
                    "mean cluster %(mean_cluster_size)s", st)
    metadata = {
        "source": "sampled",
        "model": model.describe(),
        "beta": float(config.beta),
        "seed": int(config.seed),
        "n_therm": config.n_therm,
        "n_decor": config.n_decor,
        "n_chains": config.n_chains,
        "mix": config.mix,
        "chains": chain_stats,
    }
    return SnapshotDataset(model.lattice, 0, words, metadata)


def dataset_observables(model: IsingModel, dataset: SnapshotDataset,
                        chunk: int = 65536) -> tuple[np.ndarray, np.ndarray]:
    """Per-snapshot energy and magnetization per site of a raw dataset."""
    if dataset.n_steps_applied != 0 or dataset.lattice != model.lattice:
        raise SamplerError("observables need an undecimated dataset of this lattice")
    nn_fwd, nnn_fwd, _, _ = model._tables
    n = model.lattice.n_sites
    energies = np.empty(dataset.n_snapshots)
    mags = np.empty(dataset.n_snapshots)
    for a in range(0, dataset.n_snapshots, chunk):
        s = 2 * unpack_bits(dataset.words[a:a + chunk], n).astype(np.int64) - 1
        e = -model.J * np.einsum("ri,rik->r", s, s[:, nn_fwd])
        if model.J2:
            e -= model.J2 * np.einsum("ri,rik->r", s, s[:, nnn_fwd])
        m = s.sum(axis=1)
        e += model.h * m
        energies[a:a + chunk] = e
        mags[a:a + chunk] = m / n
    return energies, mags


@dataclass(eq=False)
class ExactStats:
    """Exact thermal averages from full enumeration of 2**N states."""

    beta: float
    n_sites: int
    energy_per_site: float
    magnetization: float
    abs_magnetization: float
    m2: float
    m4: float
    probabilities: np.ndarray | None = field(default=None, repr=False)

    @property
    def binder(self) -> float:
        return 1.0 - self.m4 / (3.0 * self.m2**2)

    def marginal(self, positions) -> np.ndarray:
        """Exact distribution of the sites at ``positions``.

        Entry ``a`` of the result is the probability that the retained
        sites read ``a`` in the packed-bit convention (bit ``k`` of ``a`` is
        the site ``positions[k]``).
        """
        if self.probabilities is None:
            raise SamplerError("probability table was not stored")
        positions = np.asarray(positions, dtype=np.int64)
        states = np.arange(self.probabilities.size, dtype=np.int64)
        reduced = np.zeros_like(states)
        for k, p in enumerate(positions):
            reduced |= ((states >> p) & 1) << k
        return np.bincount(reduced, weights=self.probabilities,
                           minlength=1 << positions.size)

    def correlation(self, i: int, j: int) -> float:
        """Exact <s_i s_j>."""
        if self.probabilities is None:
            raise SamplerError("probability table was not stored")
        states = np.arange(self.probabilities.size, dtype=np.int64)
        same = ((states >> i) & 1) == ((states >> j) & 1)
        return float(np.sum(self.probabilities * np.where(same, 1.0, -1.0)))


def exact_enumeration(model: IsingModel, beta: float, max_table_sites: int = 16) -> ExactStats:
    """Exact Boltzmann averages for ``N <= 20`` sites (``beta=inf`` allowed)."""
    n = model.lattice.n_sites
    if n > 20:
        raise SamplerError(f"exact enumeration needs N <= 20, got {n}")
    nn_fwd, nnn_fwd, _, _ = model._tables
    energies = np.empty(1 << n)
    mags = np.empty(1 << n)
    K.enumerate_states(n, nn_fwd, nnn_fwd, model.J, model.J2, model.h, energies, mags)
    e_min = energies.min()
    if math.isinf(beta):
        w = np.isclose(energies, e_min, rtol=0, atol=1e-9).astype(float)
    else:
        w = np.exp(-beta * (energies - e_min))
    p = w / w.sum()
    m = mags / n
    return ExactStats(
        beta=float(beta),
        n_sites=n,
        energy_per_site=float(p @ energies) / n,
        magnetization=float(p @ m),
        abs_magnetization=float(p @ np.abs(m)),
        m2=float(p @ m**2),
        m4=float(p @ m**4),
        probabilities=p if n <= max_table_sites else None,
    )


def binder_cumulant(model: IsingModel, beta: float, n_measure: int = 20000,
                    n_therm: int = 2000, seed: int = 0,
                    n_wolff: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of ``U4 = 1 - <m^4> / (3 <m^2>^2)`` with its error.

    The error is a jackknife over 50 contiguous blocks.  ``n_wolff`` Wolff
    updates follow every Metropolis sweep; by default enough to flip about
    one lattice volume per step, measured in a pilot run.
    """
    if not model.z2_symmetric:
        raise SamplerError("Binder crossing needs a Z2-symmetric model")
    ss = _chain_seed(seed, 0)
    init_seq, mc_seq = ss.spawn(2)
    state = SpinState.random(model, np.random.default_rng(init_seq))
    rng = mc_seq.generate_state(4, dtype=np.uint64)
    _, _, nn, nnn = model._tables
    n = model.lattice.n_sites
    args = (nn, nnn, model.J, model.J2, model.h, float(beta))
    if n_wolff is None:
        pilot = max(n_therm // 2, 10)
        buf = np.empty(pilot)
        e, cl = K.run_measure(state.spins, state.energy, *args, 1, rng, 0, pilot,
                              buf, np.empty(pilot))
        state.energy = e
        n_wolff = int(min(64, max(1, round(n / max(cl / pilot, 1.0)))))
    mags = np.empty(n_measure)
    K.run_measure(state.spins, state.energy, *args, n_wolff, rng, n_therm, n_measure,
                  mags, np.empty(n_measure))
    m2 = mags**2
    m4 = m2**2
    n_blocks = 50
    b2 = np.array([x.mean() for x in np.array_split(m2, n_blocks)])
    b4 = np.array([x.mean() for x in np.array_split(m4, n_blocks)])
    u = 1.0 - m4.mean() / (3.0 * m2.mean() ** 2)
    tot2, tot4 = b2.sum(), b4.sum()
    jack = 1.0 - ((tot4 - b4) / (n_blocks - 1)) / (3.0 * ((tot2 - b2) / (n_blocks - 1)) ** 2)
    err = math.sqrt((n_blocks - 1) / n_blocks * np.sum((jack - jack.mean()) ** 2))
    return float(u), float(err)


class NoCrossingError(SamplerError):
    """The Binder cumulants of the two sizes do not cross in the beta range."""


@dataclass(frozen=True)
class CriticalEstimate:
    beta_c: float
    stderr: float
    sizes: tuple[int, int]
    evaluations: tuple = field(repr=False)

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta_c

    @property
    def temperature_stderr(self) -> float:
        return self.stderr / self.beta_c**2


def locate_critical_temperature(model: IsingModel, sizes=(16, 32), beta_range=None,
                                n_bisect: int = 7, n_measure: int = 40000,
                                n_therm: int = 4000, seed: int = 0) -> CriticalEstimate:
    """Binder-cumulant crossing of two system sizes, bracketed by bisection.

    ``g(beta) = U4(L_small) - U4(L_large)`` is positive in the disordered
    phase and negative in the ordered phase.  After bisection the crossing is
    read off a weighted linear fit of ``g`` over the evaluations near the
    final bracket.
    """
    if not model.z2_symmetric:
        raise SamplerError("Binder crossing needs a Z2-symmetric model")
    d = model.lattice.dimension
    small, large = sorted(int(s) for s in sizes)
    models = [model.with_lattice(build_lattice(d, [L] * d)) for L in (small, large)]
    if beta_range is None:
        # reference value rescaled by the total ferromagnetic coupling
        bc = (BETA_C_2D if d == 2 else 1.0 / T_C_3D) / (model.J + model.J2)
        beta_range = (0.8 * bc, 1.2 * bc)
    lo, hi = map(float, beta_range)
    evaluations = []

    def g(beta):
        k = len(evaluations)
        (u1, e1), (u2, e2) = (
            binder_cumulant(m, beta, n_measure, n_therm,
                            seed=int(_chain_seed(seed, k).generate_state(1)[0]) + j)
            for j, m in enumerate(models)
        )
        val, err = u1 - u2, math.hypot(e1, e2)
        evaluations.append((beta, val, err))
        logger.info("beta=%.5f  U4(%d)-U4(%d) = %.4f +- %.4f", beta, small, large, val, err)
        return val

    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo > 0 > g_hi):
        raise NoCrossingError(
            f"no Binder crossing in beta range [{lo}, {hi}] (g={g_lo:.4f}, {g_hi:.4f})"
        )
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    width = hi - lo
    pts = np.array([e for e in evaluations if lo - 4 * width <= e[0] <= hi + 4 * width])
    b, y, s = pts[:, 0], pts[:, 1], pts[:, 2]
    w = 1.0 / s**2
    x0 = 0.5 * (lo + hi)
    X = np.stack([np.ones_like(b), b - x0], axis=1)
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    a0, a1 = cov @ (X.T @ (w * y))
    if a1 >= 0:
        beta_c, err = x0, width
    else:
        beta_c = x0 - a0 / a1
        grad = np.array([-1.0 / a1, a0 / a1**2])
        err = float(math.sqrt(grad @ cov @ grad))
    return CriticalEstimate(float(beta_c), float(err), (small, large), tuple(evaluations))
