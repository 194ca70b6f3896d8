"""Numba kernels for single-spin Metropolis and Wolff cluster updates.

Spins are int8 (+1/-1).  Couplings come in two classes, nearest neighbor
(``nn``, coupling ``J``) and next-nearest neighbor (``nnn``, coupling
``J2``); both tables list every bond from both ends.  The energy is

    H = -J sum_nn s_i s_j - J2 sum_nnn s_i s_j + h sum_i s_i

Random numbers come from xoshiro256** with the 4-word state carried in a
uint64 array, so a chain is reproducible from its seed alone and several
chains can run on separate threads without shared state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._bits import WORD_BITS


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Double in [0, 1) from the top 53 bits."""
    return (next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def randbelow(s, n):
    # Lemire-free modulo; bias is < n / 2**64
    return np.int64(next_u64(s) % np.uint64(n))


@njit(cache=True)
def total_energy(spins, nn_fwd, nnn_fwd, J, J2, h):
    e_nn = 0
    for i in range(spins.shape[0]):
        si = spins[i]
        for k in range(nn_fwd.shape[1]):
            e_nn += si * spins[nn_fwd[i, k]]
    e_nnn = 0
    for i in range(spins.shape[0]):
        si = spins[i]
        for k in range(nnn_fwd.shape[1]):
            e_nnn += si * spins[nnn_fwd[i, k]]
    m = 0
    for i in range(spins.shape[0]):
        m += spins[i]
    return -J * e_nn - J2 * e_nnn + h * m


@njit(cache=True)
def acceptance_tables(z_nn, z_nnn, J, J2, h, beta):
    """Energy change and acceptance probability of flipping a spin, indexed by
    ``(s > 0, sum of nn spins + z_nn, sum of nnn spins + z_nnn)``."""
    de = np.empty((2, 2 * z_nn + 1, 2 * z_nnn + 1))
    p = np.empty_like(de)
    for u in range(2):
        si = 2 * u - 1
        for a in range(-z_nn, z_nn + 1):
            for b in range(-z_nnn, z_nnn + 1):
                d = 2.0 * si * (J * a + J2 * b) - 2.0 * h * si
                de[u, a + z_nn, b + z_nnn] = d
                p[u, a + z_nn, b + z_nnn] = np.exp(-beta * d) if d > 0.0 else 1.0
    return de, p


@njit(cache=True)
def metropolis_sweep(spins, nn, nnn, J, J2, h, beta, rng):
    """N random-site proposals; returns (accepted, energy change)."""
    n = spins.shape[0]
    z_nn, z_nnn = nn.shape[1], nnn.shape[1]
    de_t, p_t = acceptance_tables(z_nn, z_nnn, J, J2, h, beta)
    accepted = 0
    de_total = 0.0
    for _ in range(n):
        i = randbelow(rng, n)
        si = spins[i]
        a = 0
        for k in range(z_nn):
            a += spins[nn[i, k]]
        b = 0
        for k in range(z_nnn):
            b += spins[nnn[i, k]]
        u = 1 if si > 0 else 0
        de = de_t[u, a + z_nn, b + z_nnn]
        if de <= 0.0 or uniform(rng) < p_t[u, a + z_nn, b + z_nnn]:
            spins[i] = -si
            accepted += 1
            de_total += de
    return accepted, de_total


@njit(cache=True)
def wolff_update(spins, nn, nnn, J, J2, p_nn, p_nnn, rng, members, mark, gen):
    """Grow and flip one cluster; returns (cluster size, energy change).

    ``members`` doubles as the breadth-first queue.  ``mark``/``gen`` tag
    membership without clearing an array per update: a site belongs to the
    current cluster iff ``mark[i] == gen``.
    """
    n = spins.shape[0]
    seed = randbelow(rng, n)
    s0 = spins[seed]
    mark[seed] = gen
    members[0] = seed
    size = 1
    head = 0
    while head < size:
        i = members[head]
        head += 1
        for k in range(nn.shape[1]):
            j = nn[i, k]
            if mark[j] != gen and spins[j] == s0 and uniform(rng) < p_nn:
                mark[j] = gen
                members[size] = j
                size += 1
        for k in range(nnn.shape[1]):
            j = nnn[i, k]
            if mark[j] != gen and spins[j] == s0 and uniform(rng) < p_nnn:
                mark[j] = gen
                members[size] = j
                size += 1
    # boundary bonds seen from the member side, old spins
    de = 0.0
    for a in range(size):
        i = members[a]
        for k in range(nn.shape[1]):
            j = nn[i, k]
            if mark[j] != gen:
                de += 2.0 * J * s0 * spins[j]
        for k in range(nnn.shape[1]):
            j = nnn[i, k]
            if mark[j] != gen:
                de += 2.0 * J2 * s0 * spins[j]
    for a in range(size):
        spins[members[a]] = -s0
    return size, de


@njit(cache=True)
def is_wolff_step(t, mix):
    """Deterministic schedule: a fraction ``mix`` of steps are Wolff updates."""
    return np.floor((t + 1) * mix) > np.floor(t * mix)


@njit(cache=True)
def pack_into(spins, out_row):
    for w in range(out_row.shape[0]):
        out_row[w] = 0
    for i in range(spins.shape[0]):
        if spins[i] > 0:
            out_row[i // WORD_BITS] |= np.uint64(1) << np.uint64(i % WORD_BITS)


@njit(cache=True, nogil=True)
def run_chain(spins, energy, nn, nnn, J, J2, h, beta, mix, rng,
              n_therm, n_decor, out_words):
    """Thermalize, then record ``out_words.shape[0]`` snapshots.

    Each step is one Metropolis sweep or one Wolff update according to
    :func:`is_wolff_step`.  Returns (final energy, Metropolis acceptance
    rate, mean cluster size, number of Wolff updates).
    """
    n = spins.shape[0]
    p_nn = 1.0 - np.exp(-2.0 * beta * J)
    p_nnn = 1.0 - np.exp(-2.0 * beta * J2)
    members = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    gen = 0
    accepted = 0
    proposals = 0
    cluster_total = 0
    n_wolff = 0
    t = 0
    n_record = out_words.shape[0]
    for r in range(-1, n_record):
        n_steps = n_therm if r < 0 else n_decor
        for _ in range(n_steps):
            if is_wolff_step(t, mix):
                gen += 1
                size, de = wolff_update(spins, nn, nnn, J, J2, p_nn, p_nnn, rng,
                                        members, mark, gen)
                cluster_total += size
                n_wolff += 1
            else:
                acc, de = metropolis_sweep(spins, nn, nnn, J, J2, h, beta, rng)
                accepted += acc
                proposals += n
            energy += de
            t += 1
        if r >= 0:
            pack_into(spins, out_words[r])
    acc_rate = accepted / proposals if proposals > 0 else np.nan
    mean_cluster = cluster_total / n_wolff if n_wolff > 0 else np.nan
    return energy, acc_rate, mean_cluster, n_wolff


@njit(cache=True, nogil=True)
def run_measure(spins, energy, nn, nnn, J, J2, h, beta, n_wolff_per_sweep, rng,
                n_therm, n_measure, mags, energies):
    """Measurement chain for moment estimates.

    Each step is one Metropolis sweep followed by ``n_wolff_per_sweep`` Wolff
    updates; magnetization per site and energy are recorded after every step.
    """
    n = spins.shape[0]
    p_nn = 1.0 - np.exp(-2.0 * beta * J)
    p_nnn = 1.0 - np.exp(-2.0 * beta * J2)
    members = np.empty(n, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    gen = 0
    cluster_total = 0
    for step in range(n_therm + n_measure):
        acc, de = metropolis_sweep(spins, nn, nnn, J, J2, h, beta, rng)
        energy += de
        for _ in range(n_wolff_per_sweep):
            gen += 1
            size, de = wolff_update(spins, nn, nnn, J, J2, p_nn, p_nnn, rng,
                                    members, mark, gen)
            energy += de
            cluster_total += size
        if step >= n_therm:
            m = 0
            for i in range(n):
                m += spins[i]
            mags[step - n_therm] = m / n
            energies[step - n_therm] = energy
    return energy, cluster_total


@njit(cache=True)
def enumerate_states(n_sites, nn_fwd, nnn_fwd, J, J2, h, energies, mags):
    """Energy and total magnetization of every configuration.

    Configuration ``c`` has spin ``+1`` at site ``i`` iff bit ``i`` of ``c``
    is set, matching the snapshot bit convention.
    """
    spins = np.empty(n_sites, dtype=np.int8)
    for c in range(1 << n_sites):
        m = 0
        for i in range(n_sites):
            s = 1 if (c >> i) & 1 else -1
            spins[i] = s
            m += s
        mags[c] = m
        energies[c] = total_energy(spins, nn_fwd, nnn_fwd, J, J2, h)
