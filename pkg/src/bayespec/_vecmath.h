/* Array exp/log using glibc's libmvec AVX2 variants when the CPU has them.
 * Falls back to scalar libm otherwise.  The choice is made once per process,
 * so results are deterministic on a given machine. */
#ifndef BAYESPEC_VECMATH_H
#define BAYESPEC_VECMATH_H

#include <math.h>

#if defined(BAYESPEC_HAVE_MVEC) && defined(__x86_64__) && defined(__GNUC__)
#include <immintrin.h>

#pragma GCC push_options
#pragma GCC target("avx2,fma")
__m256d _ZGVdN4v_exp(__m256d);
__m256d _ZGVdN4v_log(__m256d);

/* Arguments below -700 take libmvec's very slow scalar path; their results
 * (under 1e-304) are flushed to zero instead.  NaN passes through. */
static inline __m256d bs_exp4(__m256d x)
{
    const __m256d floor_ = _mm256_set1_pd(-700.0);
    __m256d tiny = _mm256_cmp_pd(x, floor_, _CMP_LT_OQ);
    __m256d r = _ZGVdN4v_exp(_mm256_blendv_pd(x, floor_, tiny));
    return _mm256_andnot_pd(tiny, r);
}

static void bs_vexp_avx2(int n, const double *in, double *out)
{
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, bs_exp4(_mm256_loadu_pd(in + i)));
    if (i < n) {
        double tmp[4] = {0.0, 0.0, 0.0, 0.0};
        for (int j = i; j < n; j++) tmp[j - i] = in[j];
        _mm256_storeu_pd(tmp, bs_exp4(_mm256_loadu_pd(tmp)));
        for (int j = i; j < n; j++) out[j] = tmp[j - i];
    }
}

static void bs_vlog_avx2(int n, const double *in, double *out)
{
    int i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _ZGVdN4v_log(_mm256_loadu_pd(in + i)));
    if (i < n) {
        double tmp[4] = {1.0, 1.0, 1.0, 1.0};
        for (int j = i; j < n; j++) tmp[j - i] = in[j];
        _mm256_storeu_pd(tmp, _ZGVdN4v_log(_mm256_loadu_pd(tmp)));
        for (int j = i; j < n; j++) out[j] = tmp[j - i];
    }
}
#pragma GCC pop_options

static int bs_simd_level = -1;

static inline int bs_use_simd(void)
{
    if (bs_simd_level < 0)
        bs_simd_level = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return bs_simd_level;
}
#else
static inline int bs_use_simd(void) { return 0; }
static void bs_vexp_avx2(int n, const double *in, double *out) { (void)n; (void)in; (void)out; }
static void bs_vlog_avx2(int n, const double *in, double *out) { (void)n; (void)in; (void)out; }
#endif

static inline void bs_vexp(int n, const double *in, double *out)
{
    if (bs_use_simd()) {
        bs_vexp_avx2(n, in, out);
        return;
    }
    for (int i = 0; i < n; i++) out[i] = exp(in[i]);
}

static inline void bs_vlog(int n, const double *in, double *out)
{
    if (bs_use_simd()) {
        bs_vlog_avx2(n, in, out);
        return;
    }
    for (int i = 0; i < n; i++) out[i] = log(in[i]);
}

static inline int bs_simd_active(void) { return bs_use_simd(); }

#endif
