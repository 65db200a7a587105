"""Bit-string packing helpers shared by the round log and extractor I/O.

Every packed stream uses little-endian bit order within bytes: stream bit i
lives in byte i >> 3 at position i & 7. Round logs interleave two bits per
round (x then b), so round i occupies stream bits 2i and 2i + 1.
"""
from __future__ import annotations

import numpy as np


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack an array of 0/1 values into bytes (little-endian bit order)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")


def unpack_bits(data: np.ndarray, n: int) -> np.ndarray:
    """Unpack the first n bits of a byte buffer."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=n,
                         bitorder="little")


def pack_rounds(x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Interleave per-round bits (x then b) and pack to bytes."""
    n = x.size
    xb = np.empty(2 * n, dtype=np.uint8)
    xb[0::2] = x
    xb[1::2] = b
    return np.packbits(xb, bitorder="little")


def unpack_rounds(packed: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Recover (x, b) bit arrays for n rounds from packed bytes."""
    bits = np.unpackbits(np.frombuffer(packed, dtype=np.uint8), count=2 * n,
                         bitorder="little")
    return bits[0::2], bits[1::2]
