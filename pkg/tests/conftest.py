import math
from fractions import Fraction

import numpy as np
import pytest

from snaprg.dataset import SnapshotDataset
from snaprg.lattice import build_lattice


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def lat4():
    return build_lattice(2, [4, 4])


@pytest.fixture
def random_dataset(rng, lat4):
    def make(n_snapshots=50, lattice=None, n_steps=0):
        lattice = lattice or lat4
        n_bits = lattice.n_sites >> n_steps
        spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(n_snapshots, n_bits))
        return SnapshotDataset.from_spins(lattice, spins, n_steps)
    return make


def naive_wfn(spins, inclusive=False):
    """Explicit adjacency reference: returns (r1, R, degrees)."""
    s = np.asarray(spins)
    D = (s[:, None, :] != s[None, :, :]).sum(axis=2)
    np.fill_diagonal(D, np.iinfo(np.int64).max)
    r1 = D.min(axis=1)
    R = Fraction(int(r1.sum()), len(r1))
    # integer thresholds; comparing against a Fraction is elementwise Python
    adj = (D <= math.floor(R)) if inclusive else (D < math.ceil(R))
    np.fill_diagonal(adj, False)
    return r1, R, adj.sum(axis=1)


# ---------------------------------------------------------- acceptance report

_ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record named checks per criterion; summarized at the end of the run."""
    def record(criterion: int, name: str, ok: bool) -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok)))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for c in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[c]
        status = "PASS" if all(ok for _, ok in checks) else "FAIL"
        failed = [name for name, ok in checks if not ok]
        tr.write_line(f"criterion {c}: {status}" + (f"  (failed: {'; '.join(failed)})"
                                                   if failed else ""))
        for name, ok in checks:
            tr.write_line(f"    [{'ok' if ok else 'FAIL'}] {name}")
