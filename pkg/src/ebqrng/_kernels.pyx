# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: round sampling/packing/counting and the word-level
GF(2) Toeplitz correlation. Mirrors the contract of _kernels_py exactly."""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int64_t, uint8_t, uint64_t

cnp.import_array()

cdef extern from "_clmul.h":
    void gf2_product_window(const uint64_t *a, Py_ssize_t na,
                            const uint64_t *b, Py_ssize_t nb,
                            uint64_t *res, Py_ssize_t wlo, Py_ssize_t whi) nogil
    int gf2_clmul_available() nogil

NAME = "ext"


def clmul_available():
    return bool(gf2_clmul_available())


def sim_rounds_const(const double[::1] u_x, const double[::1] u_b,
                     double p1, double pclick0, double pclick1):
    """Sample rounds with phase-independent click probabilities.

    Returns (packed 2-bit rounds, counts[b][x]).
    """
    cdef Py_ssize_t n = u_x.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] packed = np.zeros((2 * n + 7) // 8,
                                                            dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(4, dtype=np.int64)
    cdef uint8_t * pk = <uint8_t *> packed.data
    cdef int64_t * ct = <int64_t *> counts.data
    cdef Py_ssize_t i
    cdef uint8_t x, b, cur = 0
    for i in range(n):
        x = u_x[i] < p1
        b = u_b[i] < (pclick1 if x else pclick0)
        ct[2 * b + x] += 1
        cur |= (x | (b << 1)) << ((i & 3) << 1)
        if (i & 3) == 3:
            pk[i >> 2] = cur
            cur = 0
    if n & 3:
        pk[n >> 2] = cur
    return packed, counts.reshape(2, 2)


def sim_rounds_var(const double[::1] u_x, const double[::1] u_b, double p1,
                   const double[::1] pclick0, const double[::1] pclick1):
    """Same as sim_rounds_const with per-round click probability arrays."""
    cdef Py_ssize_t n = u_x.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] packed = np.zeros((2 * n + 7) // 8,
                                                            dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(4, dtype=np.int64)
    cdef uint8_t * pk = <uint8_t *> packed.data
    cdef int64_t * ct = <int64_t *> counts.data
    cdef Py_ssize_t i
    cdef uint8_t x, b, cur = 0
    for i in range(n):
        x = u_x[i] < p1
        b = u_b[i] < (pclick1[i] if x else pclick0[i])
        ct[2 * b + x] += 1
        cur |= (x | (b << 1)) << ((i & 3) << 1)
        if (i & 3) == 3:
            pk[i >> 2] = cur
            cur = 0
    if n & 3:
        pk[n >> 2] = cur
    return packed, counts.reshape(2, 2)


def count_packed(packed, Py_ssize_t n):
    """Tally counts[b][x] from packed 2-bit rounds."""
    cdef const uint8_t[::1] buf = np.frombuffer(packed, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(4, dtype=np.int64)
    cdef int64_t * ct = <int64_t *> counts.data
    cdef Py_ssize_t i, full = n // 4
    cdef uint8_t v
    for i in range(full):
        v = buf[i]
        ct[v & 3] += 1
        ct[(v >> 2) & 3] += 1
        ct[(v >> 4) & 3] += 1
        ct[(v >> 6) & 3] += 1
    for i in range(4 * full, n):
        ct[(buf[i >> 2] >> (2 * (i & 3))) & 3] += 1
    # ct is indexed by code = x + 2b, so the reshape lands on [b][x]
    return counts.reshape(2, 2)


cdef _pack_words(const uint8_t[::1] bits):
    # bits -> uint64 words, little-endian bit order (stream bit t is word
    # t >> 6, position t & 63; requires a little-endian host).
    cdef Py_ssize_t nbytes = (bits.shape[0] + 7) // 8
    cdef Py_ssize_t nwords = (nbytes + 7) // 8
    buf = np.zeros(8 * nwords, dtype=np.uint8)
    buf[:nbytes] = np.packbits(bits, bitorder="little")
    return buf.view(np.uint64)


def toeplitz_correlate(seed_bits, v_bits, Py_ssize_t l):
    """GF(2) Toeplitz action out_i = XOR_j seed[l-1-i+j] * v_j.

    Word-level carry-less product of the seed with the reversed input,
    restricted to the product window that feeds the l output bits.
    """
    cdef Py_ssize_t k = v_bits.shape[0]
    a_words = _pack_words(np.ascontiguousarray(seed_bits, dtype=np.uint8))
    b_words = _pack_words(np.ascontiguousarray(v_bits[::-1], dtype=np.uint8))
    cdef Py_ssize_t wlo = (k - 1) >> 6
    cdef Py_ssize_t whi = (k + l - 2) >> 6
    res = np.zeros(whi + 2, dtype=np.uint64)
    cdef const uint64_t[::1] av = a_words
    cdef const uint64_t[::1] bv = b_words
    cdef uint64_t[::1] rv = res
    with nogil:
        gf2_product_window(&av[0], av.shape[0], &bv[0], bv.shape[0],
                           &rv[0], wlo, whi)
    prod_bits = np.unpackbits(res.view(np.uint8), count=k - 1 + l,
                              bitorder="little")
    return prod_bits[k - 1:k - 1 + l][::-1].copy()
