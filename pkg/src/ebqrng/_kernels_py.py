"""Pure-numpy implementations of the hot kernels.

Fallback used when the compiled extension is unavailable. Both backends
consume the same pre-drawn uniform deviates and must produce bit-identical
packed rounds, counts and extractor output; see tests/test_backends.py.
"""
from __future__ import annotations

import numpy as np
from scipy import fft as _fft

NAME = "py"

# Per-byte decoding table: byte value -> count of each round code (x + 2b)
# over the four 2-bit rounds stored in the byte.
_BYTE_CODE_COUNTS = np.zeros((256, 4), dtype=np.int64)
for _v in range(256):
    for _q in range(4):
        _BYTE_CODE_COUNTS[_v, (_v >> (2 * _q)) & 3] += 1


def _counts_from_codes(code: np.ndarray) -> np.ndarray:
    bc = np.bincount(code, minlength=4).astype(np.int64)
    # code = x + 2b, counts indexed [b][x]
    return bc.reshape(2, 2)


def sim_rounds_const(u_x, u_b, p1, pclick0, pclick1):
    """Sample rounds with phase-independent click probabilities.

    Returns (packed 2-bit rounds, counts[b][x]).
    """
    x = (u_x < p1).astype(np.uint8)
    pc = np.where(x, pclick1, pclick0)
    b = (u_b < pc).astype(np.uint8)
    n = x.size
    xb = np.empty(2 * n, dtype=np.uint8)
    xb[0::2] = x
    xb[1::2] = b
    packed = np.packbits(xb, bitorder="little")
    return packed, _counts_from_codes(x + 2 * b)


def sim_rounds_var(u_x, u_b, p1, pclick0, pclick1):
    """Same as sim_rounds_const with per-round click probability arrays."""
    x = (u_x < p1).astype(np.uint8)
    pc = np.where(x, pclick1, pclick0)
    b = (u_b < pc).astype(np.uint8)
    n = x.size
    xb = np.empty(2 * n, dtype=np.uint8)
    xb[0::2] = x
    xb[1::2] = b
    packed = np.packbits(xb, bitorder="little")
    return packed, _counts_from_codes(x + 2 * b)


def count_packed(packed, n):
    """Tally counts[b][x] from packed 2-bit rounds without unpacking."""
    packed = np.frombuffer(packed, dtype=np.uint8)
    full = n // 4
    counts = np.zeros((2, 2), dtype=np.int64)
    if full:
        byte_hist = np.bincount(packed[:full], minlength=256).astype(np.int64)
        counts += (byte_hist @ _BYTE_CODE_COUNTS).reshape(2, 2)
    for i in range(4 * full, n):
        code = (int(packed[i >> 2]) >> (2 * (i & 3))) & 3
        counts[code >> 1, code & 1] += 1
    return counts


def toeplitz_correlate(seed_bits, v_bits, l):
    """GF(2) Toeplitz action out_i = XOR_j seed[l-1-i+j] * v_j.

    Computed as an integer cross-correlation via real FFTs with parity taken
    at the end. Exactness of the rounding step is asserted; coefficient
    magnitudes stay far below the double-precision integer limit for any
    chunk size this package uses.
    """
    k = int(v_bits.size)
    seed_f = np.asarray(seed_bits, dtype=np.float64)
    vrev_f = np.asarray(v_bits[::-1], dtype=np.float64)
    nfft = _fft.next_fast_len(seed_f.size + k - 1, real=True)
    prod = _fft.irfft(_fft.rfft(seed_f, nfft) * _fft.rfft(vrev_f, nfft), nfft)
    window = prod[k - 1:k - 1 + l]
    ints = np.rint(window)
    err = np.max(np.abs(window - ints)) if l else 0.0
    if err > 0.25:
        raise FloatingPointError(
            f"FFT correlation not integer-exact (max deviation {err:.3g})"
        )
    return (ints.astype(np.int64) & 1).astype(np.uint8)[::-1]
