/* GF(2) polynomial multiplication kernels.
 *
 * On x86-64 with PCLMULQDQ the 64x64 -> 128 bit carry-less products come
 * from hardware; elsewhere a portable shift-and-xor routine is used. The
 * dispatch happens once, at first call.
 */
#include "_clmul.h"

#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
#define EBQRNG_X86_CLMUL 1
#include <immintrin.h>
#endif

static void mul64_portable(uint64_t a, uint64_t b, uint64_t *hi, uint64_t *lo)
{
    uint64_t l = 0, h = 0;
    while (b) {
        int s = __builtin_ctzll(b);
        l ^= a << s;
        if (s)
            h ^= a >> (64 - s);
        b &= b - 1;
    }
    *hi = h;
    *lo = l;
}

static void window_portable(const uint64_t *a, ptrdiff_t na,
                            const uint64_t *b, ptrdiff_t nb,
                            uint64_t *res, ptrdiff_t wlo, ptrdiff_t whi)
{
    ptrdiff_t i, j;
    uint64_t hi, lo;
    for (j = 0; j < nb; j++) {
        ptrdiff_t ilo = wlo - 1 - j < 0 ? 0 : wlo - 1 - j;
        ptrdiff_t ihi = whi - j < na - 1 ? whi - j : na - 1;
        if (!b[j])
            continue;
        for (i = ilo; i <= ihi; i++) {
            mul64_portable(a[i], b[j], &hi, &lo);
            res[i + j] ^= lo;
            res[i + j + 1] ^= hi;
        }
    }
}

#ifdef EBQRNG_X86_CLMUL
__attribute__((target("pclmul,sse2")))
static void window_clmul(const uint64_t *a, ptrdiff_t na,
                         const uint64_t *b, ptrdiff_t nb,
                         uint64_t *res, ptrdiff_t wlo, ptrdiff_t whi)
{
    ptrdiff_t i, j;
    for (j = 0; j < nb; j++) {
        ptrdiff_t ilo = wlo - 1 - j < 0 ? 0 : wlo - 1 - j;
        ptrdiff_t ihi = whi - j < na - 1 ? whi - j : na - 1;
        __m128i vb, acc_lo, acc_hi;
        if (!b[j])
            continue;
        vb = _mm_cvtsi64_si128((long long)b[j]);
        for (i = ilo; i <= ihi; i++) {
            __m128i va = _mm_cvtsi64_si128((long long)a[i]);
            __m128i p = _mm_clmulepi64_si128(va, vb, 0x00);
            acc_lo = _mm_cvtsi64_si128((long long)res[i + j]);
            acc_hi = _mm_cvtsi64_si128((long long)res[i + j + 1]);
            res[i + j] = (uint64_t)_mm_cvtsi128_si64(_mm_xor_si128(p, acc_lo));
            res[i + j + 1] = (uint64_t)_mm_cvtsi128_si64(
                _mm_xor_si128(_mm_unpackhi_epi64(p, p), acc_hi));
        }
    }
}
#endif

static int have_clmul(void)
{
#ifdef EBQRNG_X86_CLMUL
    return __builtin_cpu_supports("pclmul");
#else
    return 0;
#endif
}

int gf2_clmul_available(void)
{
    return have_clmul();
}

void gf2_product_window(const uint64_t *a, ptrdiff_t na,
                        const uint64_t *b, ptrdiff_t nb,
                        uint64_t *res, ptrdiff_t wlo, ptrdiff_t whi)
{
#ifdef EBQRNG_X86_CLMUL
    if (have_clmul()) {
        window_clmul(a, na, b, nb, res, wlo, whi);
        return;
    }
#endif
    window_portable(a, na, b, nb, res, wlo, whi);
}
