"""Snapshot datasets: in-memory model, SNAPRG01 files, text ingestion, dedup.

A snapshot stores spin ``s_i`` as bit ``(s_i + 1) / 2`` at its site index
(row-major, x fastest), packed into little-endian 64-bit words with zero
padding.  After ``k`` RG steps the bit order is the increasing original
site index of the retained sites.

File layout (all integers little-endian)::

    magic        8 bytes   b"SNAPRG01"
    header_len   u32
    header       header_len bytes of UTF-8 JSON
    body         N_r records of ceil(N / 64) u64 words

The header carries ``dimension``, ``lengths``, ``n_steps_applied``,
``n_bits``, ``n_snapshots``, ``words_per_snapshot`` and a free-form
``metadata`` object (source, model, beta, seed, ...).
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._bits import n_words, pack_bits, padding_is_zero, unpack_bits
from .lattice import LatticeError, LatticeSpec, build_lattice, decimation_mask

MAGIC = b"SNAPRG01"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    """Malformed dataset, file or text input."""


@dataclass(frozen=True, eq=False)
class SnapshotDataset:
    """Bit-packed snapshots of one lattice after ``n_steps_applied`` RG steps."""

    lattice: LatticeSpec
    n_steps_applied: int
    words: np.ndarray = field(repr=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.ndim != 2:
            raise DatasetError("snapshot words must be a 2D array")
        object.__setattr__(self, "words", words)
        if words.shape[0] < 1:
            raise DatasetError("a dataset needs at least one snapshot")
        if words.shape[1] != n_words(self.n_bits):
            raise DatasetError(
                f"expected {n_words(self.n_bits)} words per snapshot, got {words.shape[1]}"
            )

    @property
    def n_bits(self) -> int:
        return self.lattice.n_sites >> self.n_steps_applied

    @property
    def n_snapshots(self) -> int:
        return self.words.shape[0]

    def mask(self):
        return decimation_mask(self.lattice, self.n_steps_applied)

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.n_bits)

    def spins(self) -> np.ndarray:
        """Snapshots as an int8 array of +1/-1, shape (N_r, n_bits)."""
        return (2 * self.bits().astype(np.int8) - 1).astype(np.int8)

    @classmethod
    def from_spins(cls, lattice: LatticeSpec, spins, n_steps_applied: int = 0,
                   metadata: dict | None = None) -> "SnapshotDataset":
        s = np.atleast_2d(np.asarray(spins))
        if not np.all(np.abs(s) == 1):
            raise DatasetError("spins must be +1 or -1")
        n_bits = lattice.n_sites >> n_steps_applied
        if s.shape[1] != n_bits:
            raise DatasetError(f"expected {n_bits} spins per snapshot, got {s.shape[1]}")
        return cls(lattice, n_steps_applied, pack_bits(s > 0), dict(metadata or {}))

    def equals(self, other: "SnapshotDataset") -> bool:
        return (
            self.lattice == other.lattice
            and self.n_steps_applied == other.n_steps_applied
            and np.array_equal(self.words, other.words)
            and self.metadata == other.metadata
        )

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "dimension": self.lattice.dimension,
            "lengths": list(self.lattice.lengths),
            "n_steps_applied": self.n_steps_applied,
            "n_bits": self.n_bits,
            "n_snapshots": self.n_snapshots,
            "words_per_snapshot": self.words.shape[1],
            "metadata": self.metadata,
        }


def write_dataset(dataset: SnapshotDataset, path) -> None:
    header = json.dumps(dataset.header(), sort_keys=True).encode("utf-8")
    body = dataset.words.astype("<u8", copy=False).tobytes()
    tmp = Path(f"{path}.tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(body)
    os.replace(tmp, path)


def read_dataset(path) -> SnapshotDataset:
    """Read and validate a SNAPRG01 file.

    Raises
    ------
    DatasetError
        On a bad magic, truncated body, nonzero padding or an inconsistent
        header.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != MAGIC:
        raise DatasetError(f"{path}: bad magic {raw[:8]!r}, expected {MAGIC!r}")
    if len(raw) < 12:
        raise DatasetError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<I", raw[8:12])
    try:
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"{path}: unreadable header: {exc}") from None
    try:
        lattice = build_lattice(header["dimension"], header["lengths"])
        n_steps = int(header["n_steps_applied"])
        n_bits = int(header["n_bits"])
        n_r = int(header["n_snapshots"])
        wps = int(header["words_per_snapshot"])
    except KeyError as exc:
        raise DatasetError(f"{path}: header misses field {exc}") from None
    except LatticeError as exc:
        raise DatasetError(f"{path}: {exc}") from None
    if n_r < 1:
        raise DatasetError(f"{path}: header declares N_r={n_r}, need at least 1")
    if n_bits != lattice.n_sites >> n_steps or wps != n_words(n_bits):
        raise DatasetError(
            f"{path}: header n_bits={n_bits}/words={wps} inconsistent with lattice "
            f"{list(lattice.lengths)} after {n_steps} RG steps"
        )
    body = raw[12 + hlen:]
    record = wps * 8
    found = len(body) // record
    if len(body) != n_r * record:
        raise DatasetError(
            f"{path}: body holds {found} complete records ({len(body)} bytes), "
            f"expected {n_r}"
        )
    words = np.frombuffer(body, dtype="<u8").reshape(n_r, wps).astype(np.uint64)
    if not padding_is_zero(words, n_bits):
        raise DatasetError(f"{path}: nonzero padding bits")
    return SnapshotDataset(lattice, n_steps, words, header.get("metadata", {}))


_SYMBOLS = {
    "pm1": {"+1": 1, "1": 1, "-1": 0, "−1": 0},
    "01": {"1": 1, "0": 0},
}


def ingest_text(path, lattice: LatticeSpec, mapping: str = "pm1",
                n_steps_applied: int = 0, source_tag: str | None = None) -> SnapshotDataset:
    """Read one whitespace-separated configuration per line.

    ``mapping="pm1"`` expects tokens +1/-1, ``mapping="01"`` expects 1/0 with
    ``0 -> s=-1``.  Tokens follow the row-major site order (x fastest).
    Blank lines are skipped.
    """
    if mapping not in _SYMBOLS:
        raise DatasetError(f"unknown symbol mapping {mapping!r}")
    table = _SYMBOLS[mapping]
    n_bits = lattice.n_sites >> n_steps_applied
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != n_bits:
                raise DatasetError(
                    f"{path}:{lineno}: expected {n_bits} tokens, found {len(tokens)}"
                )
            try:
                rows.append([table[t] for t in tokens])
            except KeyError as exc:
                raise DatasetError(f"{path}:{lineno}: unknown token {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: no configurations found")
    metadata = {"source": "ingested", "source_tag": source_tag or os.path.basename(str(path)),
                "mapping": mapping}
    return SnapshotDataset(lattice, n_steps_applied, pack_bits(np.array(rows)), metadata)


@dataclass(frozen=True, eq=False)
class DedupDataset:
    """Unique snapshots in first-occurrence order with their multiplicities."""

    source: SnapshotDataset = field(repr=False)
    words: np.ndarray = field(repr=False)
    multiplicities: np.ndarray
    first_index: np.ndarray = field(repr=False)

    @property
    def n_unique(self) -> int:
        return self.words.shape[0]

    @property
    def n_bits(self) -> int:
        return self.source.n_bits


def deduplicate(dataset: SnapshotDataset) -> DedupDataset:
    """Hash-based removal of repeated snapshots."""
    seen: dict[bytes, int] = {}
    first = []
    counts = []
    for r, row in enumerate(dataset.words):
        key = row.tobytes()
        slot = seen.get(key)
        if slot is None:
            seen[key] = len(first)
            first.append(r)
            counts.append(1)
        else:
            counts[slot] += 1
    first = np.asarray(first, dtype=np.int64)
    return DedupDataset(
        dataset,
        np.ascontiguousarray(dataset.words[first]),
        np.asarray(counts, dtype=np.int64),
        first,
    )
