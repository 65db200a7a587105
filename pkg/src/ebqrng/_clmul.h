#ifndef EBQRNG_CLMUL_H
#define EBQRNG_CLMUL_H

#include <stdint.h>
#include <stddef.h>

/* Carry-less (GF(2) polynomial) product of the bit strings packed in `a`
 * (na 64-bit words) and `b` (nb words), restricted to product words wlo..whi.
 * `res` must hold at least whi + 2 words and be zero-initialised; words
 * outside [wlo, whi + 1] are left untouched. Word w holds product bits
 * 64w..64w+63, little-endian bit order. */
void gf2_product_window(const uint64_t *a, ptrdiff_t na,
                        const uint64_t *b, ptrdiff_t nb,
                        uint64_t *res, ptrdiff_t wlo, ptrdiff_t whi);

/* 1 when the hardware carry-less multiply path is in use. */
int gf2_clmul_available(void);

#endif
