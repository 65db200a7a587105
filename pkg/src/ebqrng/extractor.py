"""Seeded Toeplitz randomness extraction over GF(2).

The k x l Toeplitz matrix built from a (k + l - 1)-bit seed is a two-universal
hash family; hashing k raw bits holding m bits of min-entropy down to
l <= m - 2*log2(1/eps) bits leaves the output within trace distance eps of
uniform (leftover hashing). Matrix convention: out[i] = sum_j T[i][j]*v[j]
mod 2 with T[i][j] = seed[l - 1 - i + j], so the seed fills the first column
bottom-up, then the first row left to right.
"""
from __future__ import annotations

import math

import numpy as np

from .backend import get_backend
from .bits import pack_bits, unpack_bits

__all__ = [
    "output_length",
    "seed_length",
    "toeplitz_extract",
    "read_packed_bits",
    "write_packed_bits",
    "EXTRACT_CHUNK_BITS",
]

# Inputs longer than this are hashed block-wise with sequential seed
# segments; keeps the dense correlation window small. Part of the output
# contract: changing it changes chunk boundaries and therefore the output.
EXTRACT_CHUNK_BITS = 1 << 20


def output_length(min_entropy_bits: float, epsilon: float) -> int:
    """Longest extractable output at trace distance epsilon from uniform."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon out of range")
    if min_entropy_bits < 0:
        raise ValueError("min-entropy must be non-negative")
    return max(0, math.floor(min_entropy_bits - 2.0 * math.log2(1.0 / epsilon)))


def seed_length(n_input_bits: int, n_output_bits: int) -> int:
    """Seed bits required to hash n_input_bits down to n_output_bits."""
    if n_input_bits < 1:
        raise ValueError("input length must be >= 1")
    if n_output_bits < 1:
        raise ValueError("output length must be >= 1")
    return n_input_bits + n_output_bits - 1


def _as_bits(arr, name: str) -> np.ndarray:
    bits = np.ascontiguousarray(np.asarray(arr), dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError(f"{name} must be a 1-d bit array")
    if bits.size and bits.max() > 1:
        raise ValueError(f"{name} must contain only 0/1 values")
    return bits


def toeplitz_extract(input_bits, seed_bits, n_output_bits: int,
                     chunk_bits: int = EXTRACT_CHUNK_BITS) -> np.ndarray:
    """Hash input_bits to n_output_bits using a seed of k + l - 1 bits.

    Inputs longer than chunk_bits are split into chunk_bits-sized blocks;
    block i of k_i bits produces l_i = floor(l*K_i/k) - floor(l*K_{i-1}/k)
    output bits (K_i the cumulative input length) from its own Toeplitz
    matrix, seeded with the next k_i + l_i - 1 unused seed bits. Outputs
    concatenate in block order. Deterministic for fixed chunk_bits.
    """
    v = _as_bits(input_bits, "input")
    seed = _as_bits(seed_bits, "seed")
    k = v.size
    l = n_output_bits
    if k < 1:
        raise ValueError("input length must be >= 1")
    if l < 1:
        raise ValueError("output length must be >= 1")
    if l > k:
        raise ValueError(f"output length {l} exceeds input length {k}")
    need = seed_length(k, l)
    if seed.size != need:
        raise ValueError(f"seed must be {need} bits for k={k}, l={l}, "
                         f"got {seed.size}")
    if chunk_bits < 1:
        raise ValueError("chunk_bits must be >= 1")

    kernel = get_backend()
    if k <= chunk_bits:
        return kernel.toeplitz_correlate(seed, v, l)

    out = np.empty(l, dtype=np.uint8)
    consumed = 0
    out_done = 0
    seed_pos = 0
    while consumed < k:
        ki = min(chunk_bits, k - consumed)
        li = (l * (consumed + ki)) // k - (l * consumed) // k
        if li:
            seg = seed[seed_pos:seed_pos + ki + li - 1]
            out[out_done:out_done + li] = kernel.toeplitz_correlate(
                seg, v[consumed:consumed + ki], li)
            seed_pos += ki + li - 1
            out_done += li
        consumed += ki
    return out


def write_packed_bits(path, bits) -> None:
    """Write bits packed 8 per byte, least significant bit first."""
    arr = _as_bits(bits, "bits")
    if arr.size < 1:
        raise ValueError("no data: refusing to write an empty bit file")
    with open(path, "wb") as fh:
        fh.write(pack_bits(arr).tobytes())


def read_packed_bits(path, n_bits: int | None = None) -> np.ndarray:
    """Read a packed bit file; n_bits trims trailing pad bits."""
    with open(path, "rb") as fh:
        raw = np.frombuffer(fh.read(), dtype=np.uint8)
    if raw.size == 0:
        raise ValueError(f"no data: {path} is empty")
    avail = raw.size * 8
    if n_bits is None:
        n_bits = avail
    elif n_bits > avail:
        raise ValueError(f"{path} holds {avail} bits, need {n_bits}")
    elif n_bits < 1:
        raise ValueError("n_bits must be >= 1")
    return unpack_bits(raw, n_bits)
