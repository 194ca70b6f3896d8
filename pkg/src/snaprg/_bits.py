"""Bit-packing helpers and the popcount intrinsic shared by the kernels."""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.extending import intrinsic

WORD_BITS = 64


@intrinsic
def popcount64(typingctx, x):
    """Hardware population count of a uint64 (LLVM ``ctpop``)."""
    sig = types.int64(types.uint64)

    def codegen(context, builder, signature, args):
        return builder.ctpop(args[0])

    return sig, codegen


def n_words(n_bits: int) -> int:
    return -(-n_bits // WORD_BITS)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (n, N) array of 0/1 into (n, ceil(N/64)) uint64 words.

    Bit ``i`` lands in word ``i // 64`` at position ``i % 64``; padding bits
    are zero.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim == 1:
        bits = bits[None, :]
    n, n_bits = bits.shape
    w = n_words(n_bits)
    padded = np.zeros((n, w * WORD_BITS), dtype=np.uint8)
    padded[:, :n_bits] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def unpack_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`; returns uint8 of shape (n, n_bits)."""
    words = np.ascontiguousarray(np.atleast_2d(words), dtype="<u8")
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little", count=n_bits)


def padding_is_zero(words: np.ndarray, n_bits: int) -> bool:
    rem = n_bits % WORD_BITS
    if rem == 0 or words.size == 0:
        return True
    mask = np.uint64(~((1 << rem) - 1) & 0xFFFFFFFFFFFFFFFF)
    return not np.any(words[:, -1] & mask)


@njit(cache=True)
def gather_bits(words, positions, out):
    """Copy bits at ``positions`` of every row into consecutive bits of ``out``."""
    n = words.shape[0]
    m = positions.shape[0]
    for r in range(n):
        for k in range(m):
            p = positions[k]
            b = (words[r, p >> 6] >> np.uint64(p & 63)) & np.uint64(1)
            if b:
                out[r, k >> 6] |= np.uint64(1) << np.uint64(k & 63)
    return out
