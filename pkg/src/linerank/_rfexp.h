/* Vectorizable inner loops for the tilted rate-function kernel.
 *
 * The hot operation is a fused pass computing the exponentially tilted
 * moments sum(w), sum(sh*w), sum(sh*sh*w) with w = exp(lam*sh) and
 * sh = f[i] - fmax <= 0. libm's exp cannot be vectorized by the
 * compiler, so exp is inlined here: Cody-Waite range reduction and a
 * degree-12 polynomial, branch-free, accurate to a few ulp on the
 * nonpositive domain used by the kernel. Arguments below -708 clamp to
 * the smallest normal scale; such terms are below 1e-300 relative to
 * the leading term exp(0) = 1, far outside double precision.
 *
 * The `omp simd` reductions license reassociation of the sums without
 * fast-math semantics anywhere else; the pragmas are inert (correct,
 * scalar) when the compiler does not honor them. On x86-64/glibc each
 * loop is cloned per ISA and dispatched at load time.
 */
#ifndef LINERANK_RFEXP_H
#define LINERANK_RFEXP_H

#include <stddef.h>
#include <stdint.h>
#include <string.h>

#if defined(__x86_64__) && defined(__gnu_linux__) && \
    (defined(__GNUC__) || defined(__clang__))
#define RF_TARGETS __attribute__((target_clones("avx512f", "avx2", "default")))
#else
#define RF_TARGETS
#endif

#define RF_INVLN2 1.4426950408889634074
#define RF_LN2HI 6.93147180369123816490e-01
#define RF_LN2LO 1.90821492927058770002e-10
#define RF_SHIFT 6755399441055744.0 /* 1.5 * 2^52 */

static inline double rf_exp_neg(double x)
{
    double z, kd, r, p, scale;
    int64_t zbits;
    int32_t k;
    uint64_t sbits;

    x = x < -708.0 ? -708.0 : x; /* keep 2^k normal */
    z = x * RF_INVLN2 + RF_SHIFT;
    kd = z - RF_SHIFT; /* nearest integer to x/ln2 */
    memcpy(&zbits, &z, 8);
    k = (int32_t)zbits; /* low mantissa bits hold k */
    r = x - kd * RF_LN2HI - kd * RF_LN2LO; /* |r| <= ln2/2 */

    p = 2.08767569878681e-09; /* 1/12! */
    p = p * r + 2.505210838544172e-08;
    p = p * r + 2.755731922398589e-07;
    p = p * r + 2.7557319223985893e-06;
    p = p * r + 2.48015873015873016e-05;
    p = p * r + 1.9841269841269841e-04;
    p = p * r + 1.388888888888889e-03;
    p = p * r + 8.333333333333333e-03;
    p = p * r + 4.1666666666666664e-02;
    p = p * r + 1.6666666666666666e-01;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;

    sbits = (uint64_t)(int64_t)(k + 1023) << 52; /* 2^k */
    memcpy(&scale, &sbits, 8);
    return p * scale;
}

RF_TARGETS
static void rf_maxmean(const double *f, ptrdiff_t n, double *out_max,
                       double *out_sum)
{
    double m = f[0];
    double s = 0.0;
    ptrdiff_t i;
#pragma omp simd reduction(max : m) reduction(+ : s)
    for (i = 0; i < n; i++) {
        m = f[i] > m ? f[i] : m;
        s += f[i];
    }
    *out_max = m;
    *out_sum = s;
}

RF_TARGETS
static void rf_moments(const double *f, ptrdiff_t n, double fmax, double lam,
                       double *out0, double *out1, double *out2)
{
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    ptrdiff_t i;
#pragma omp simd reduction(+ : s0, s1, s2)
    for (i = 0; i < n; i++) {
        double sh = f[i] - fmax;
        double w = rf_exp_neg(lam * sh);
        double t = sh * w;
        s0 += w;
        s1 += t;
        s2 += sh * t;
    }
    *out0 = s0;
    *out1 = s1;
    *out2 = s2;
}

RF_TARGETS
static double rf_sumexp(const double *f, ptrdiff_t n, double fmax, double lam)
{
    double s0 = 0.0;
    ptrdiff_t i;
#pragma omp simd reduction(+ : s0)
    for (i = 0; i < n; i++)
        s0 += rf_exp_neg(lam * (f[i] - fmax));
    return s0;
}

#endif /* LINERANK_RFEXP_H */
