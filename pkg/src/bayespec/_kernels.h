/* Per-point loops of the energy evaluation, written so the compiler can
 * vectorise them.  Each function is cloned for AVX2 and dispatched at load
 * time; FMA is deliberately left off so both clones round identically. */
#ifndef BAYESPEC_KERNELS_H
#define BAYESPEC_KERNELS_H

#include <math.h>
#include "_vecmath.h"

#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
#define BS_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define BS_CLONES
#endif

#define BS_TWO_PI 6.283185307179586

BS_CLONES
static void bs_add(int n, double *restrict f, const double *restrict src)
{
    for (int i = 0; i < n; i++) f[i] += src[i];
}

/* Gaussian peak amp * exp(-bw/2 (x - mu)^2).  tmp holds n doubles. */
BS_CLONES
static void bs_gauss_peak(int n, const double *restrict xs, double *restrict out,
                          double *restrict tmp, double amp, double mu, double bw)
{
    for (int i = 0; i < n; i++) {
        double dx = xs[i] - mu;
        tmp[i] = -0.5 * bw * (dx * dx);
    }
    bs_vexp(n, tmp, tmp);
    for (int i = 0; i < n; i++) out[i] = amp * tmp[i];
}

/* Pseudo-Voigt with shared half width sig; eta weights the Gaussian part. */
BS_CLONES
static void bs_pvoigt_peak(int n, const double *restrict xs, double *restrict out,
                           double *restrict tmp, double amp, double mu, double sig,
                           double eta)
{
    double s2 = sig * sig, g = -0.6931471805599453 / s2;
    for (int i = 0; i < n; i++) {
        double dx = xs[i] - mu;
        tmp[i] = g * (dx * dx);
    }
    bs_vexp(n, tmp, tmp);
    for (int i = 0; i < n; i++) {
        double dx = xs[i] - mu;
        double lor = s2 / (s2 + dx * dx);
        out[i] = amp * (eta * tmp[i] + (1.0 - eta) * lor);
    }
}

/* Iterative Shirley background added in place to f.  cum is scratch. */
BS_CLONES
static void bs_shirley(int n, const double *restrict xs, double *restrict f,
                       double *restrict cum, double a, double b)
{
    double mx = f[0], total, thresh, lo, hi, span, scale;
    int i;
    cum[0] = 0.0;
    for (i = 1; i < n; i++)
        cum[i] = 0.5 * (f[i] + f[i - 1]) * (xs[i] - xs[i - 1]);
    for (i = 1; i < n; i++)
        cum[i] += cum[i - 1];
    for (i = 1; i < n; i++)
        mx = f[i] > mx ? f[i] : mx;
    total = cum[n - 1];
    span = xs[n - 1] - xs[0];
    thresh = 1e-12 * mx * span;
    lo = a < b ? a : b;
    hi = a < b ? b : a;
    if (total <= thresh) {
        scale = 1.0 / span;
        for (i = 0; i < n; i++) cum[i] = (xs[i] - xs[0]) * scale;
    } else {
        for (i = 0; i < n; i++) cum[i] = cum[i] / total;
    }
    for (i = 0; i < n; i++) {
        double v = a + (b - a) * cum[i];
        v = v < lo ? lo : v;
        v = v > hi ? hi : v;
        cum[i] = v;
    }
    cum[0] = a;
    if (n > 1) cum[n - 1] = b;
    for (i = 0; i < n; i++) f[i] += cum[i];
}

/* 1 when every entry is finite. */
BS_CLONES
static int bs_all_finite(int n, const double *restrict f)
{
    double s = 0.0;
#pragma omp simd reduction(+:s)
    for (int i = 0; i < n; i++) s += f[i] * 0.0;
    return s == 0.0;
}

/* 1 when every entry is strictly positive (NaN counts as not positive). */
BS_CLONES
static int bs_all_positive(int n, const double *restrict f)
{
    int bad = 0;
#pragma omp simd reduction(|:bad)
    for (int i = 0; i < n; i++) bad |= !(f[i] > 0.0);
    return !bad;
}

/* Summed Gaussian energy with fixed variance. */
BS_CLONES
static double bs_e_gauss(int n, const double *restrict ys, const double *restrict f, double var)
{
    double s = 0.0, inv = 1.0 / (2.0 * var);
#pragma omp simd reduction(+:s)
    for (int i = 0; i < n; i++) {
        double r = ys[i] - f[i];
        s += r * r;
    }
    return n * 0.5 * log(BS_TWO_PI * var) + s * inv;
}

/* Summed Poisson energy without the log-factorial term.  tmp holds n doubles. */
BS_CLONES
static double bs_e_poisson(int n, const double *restrict ys, const double *restrict f,
                           double *restrict tmp)
{
    double s = 0.0;
    bs_vlog(n, f, tmp);
#pragma omp simd reduction(+:s)
    for (int i = 0; i < n; i++) s += f[i] - ys[i] * tmp[i];
    return s;
}

/* Gaussian with variance var_i = s0 f + s1 f^2 + s2; k is 2, or 1 for the
 * literal form.  Returns INFINITY when any variance is not positive. */
BS_CLONES
static double bs_e_hetero(int n, const double *restrict ys, const double *restrict f,
                          double *restrict tmp, double s0, double s1, double s2, double k)
{
    double s = 0.0;
    int bad = 0;
#pragma omp simd reduction(|:bad)
    for (int i = 0; i < n; i++) {
        double v = s0 * f[i] + s1 * f[i] * f[i] + s2;
        bad |= !(v > 0.0) | !(v < INFINITY);
        tmp[i] = BS_TWO_PI * v;
    }
    if (bad) return INFINITY;
    bs_vlog(n, tmp, tmp);
#pragma omp simd reduction(+:s)
    for (int i = 0; i < n; i++) {
        double v = s0 * f[i] + s1 * f[i] * f[i] + s2;
        double r = ys[i] - f[i];
        s += 0.5 * tmp[i] + r * r / (k * v);
    }
    return s;
}

#endif
