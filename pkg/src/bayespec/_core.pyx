# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling kernels (OpenMP over chains).

Mirrors ``bayespec._fallback`` operation for operation: same random-number
counters, same block decomposition, same summation order over blocks and
prior components.  Per-point energy reductions are vectorised here and
pairwise in numpy, so the two backends agree to rounding.
"""
import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp, log, sqrt, cos, pow, INFINITY, isfinite, isnan
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy, memset

cdef extern from "_vecmath.h" nogil:
    void bs_vexp(int n, const double *inp, double *out)
    void bs_vlog(int n, const double *inp, double *out)
    int bs_simd_active()

cdef extern from "_kernels.h" nogil:
    void bs_add(int n, double *f, const double *src)
    void bs_gauss_peak(int n, const double *xs, double *out, double *tmp,
                       double amp, double mu, double bw)
    void bs_pvoigt_peak(int n, const double *xs, double *out, double *tmp,
                        double amp, double mu, double sig, double eta)
    void bs_shirley(int n, const double *xs, double *f, double *cum, double a, double b)
    int bs_all_finite(int n, const double *f)
    int bs_all_positive(int n, const double *f)
    double bs_e_gauss(int n, const double *ys, const double *f, double var)
    double bs_e_poisson(int n, const double *ys, const double *f, double *tmp)
    double bs_e_hetero(int n, const double *ys, const double *f, double *tmp,
                       double s0, double s1, double s2, double k)

NAME = "cython"
SIMD = bool(bs_simd_active())

cdef double FOUR_LN2 = 4.0 * log(2.0)
cdef double TWO_PI = 2.0 * 3.141592653589793
cdef double INV53 = 1.0 / 9007199254740992.0
cdef double STEP_MIN = 1e-12
cdef double STEP_MAX = 1e12


cdef struct Model:
    int family
    int n
    int d
    int nblocks
    int noise
    int literal
    int nphase
    int degree
    double *xs
    double *ys
    double *noise_params
    int64_t *block_of
    int64_t *prior_kind
    double *pa
    double *pb
    double *pc
    double *tan_h
    double *sec_h
    int64_t *refl_start
    double *refl_pos
    double *refl_int


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t rbits(uint64_t key, uint64_t c) noexcept nogil:
    return mix64(key ^ mix64(c * <uint64_t>0x9E3779B97F4A7C15ULL + <uint64_t>0x9E3779B97F4A7C15ULL))


cdef inline double runif(uint64_t key, uint64_t c) noexcept nogil:
    return <double>(rbits(key, c) >> 11) * INV53


cdef inline double rnorm(uint64_t key, uint64_t c) noexcept nogil:
    cdef double u1 = (<double>(rbits(key, c) >> 11) + 1.0) * INV53
    cdef double u2 = <double>(rbits(key, c + 1) >> 11) * INV53
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline double lp_comp(Model *m, int i, double x) noexcept nogil:
    cdef int64_t k = m.prior_kind[i]
    cdef double dd
    if k == 0:
        if not (x > 0):
            return -INFINITY
        return m.pc[i] + (m.pa[i] - 1.0) * log(x) - m.pb[i] * x
    elif k == 1:
        dd = x - m.pa[i]
        return m.pc[i] - dd * dd / (2.0 * m.pb[i])
    if x >= m.pa[i] and x <= m.pb[i]:
        return m.pc[i]
    return -INFINITY


cdef int block_eval(Model *m, double *th, int b, double *out, double *work) noexcept nogil:
    """Contribution of block ``b``; returns 1 on a model fault.  ``work`` holds 3n doubles."""
    cdef int n = m.n, i, j, fault = 0
    cdef double z
    cdef double shift, r, alpha, u, vv, w, s, t, tn, disc, c, rel, asym, zg, zl
    cdef double *p
    cdef double *args = work + 2 * n
    if m.family == 0:
        bs_gauss_peak(n, m.xs, out, args, th[3 * b], th[3 * b + 1], th[3 * b + 2])
        return 0
    if m.family == 2:
        bs_pvoigt_peak(n, m.xs, out, args, th[4 * b], th[4 * b + 1], th[4 * b + 2],
                       th[4 * b + 3])
        return 0
    if m.family == 3:
        for i in range(n):
            z = th[m.degree]
            for j in range(m.degree - 1, -1, -1):
                z = z * m.xs[i] + th[j]
            out[i] = z
        return 0
    # XRD
    if b == m.nphase:
        p = th + 9 * m.nphase
        for i in range(n):
            z = m.xs[i] / p[1]
            args[i] = -FOUR_LN2 * z * z
        bs_vexp(n, args, args)
        for i in range(n):
            z = m.xs[i] / p[1]
            out[i] = p[0] * ((1.0 - p[2]) * args[i] + p[2] / (1.0 + 4.0 * z * z)) + p[3]
        return 0
    p = th + 9 * b
    amp = p[0]
    shift = p[1]
    r = p[2]
    alpha = p[3]
    u = p[4]
    vv = p[5]
    w = p[6]
    s = p[7]
    t = p[8]
    # work[0:n] = sqrt(disc), work[n:2n] = Lorentzian width base
    for i in range(n):
        tn = m.tan_h[i]
        disc = u * tn * tn - vv * tn + w
        if not (disc > 0) or not isfinite(disc):
            fault = 1
        work[i] = sqrt(disc)
        work[n + i] = s * m.sec_h[i] + t * tn
        out[i] = 0.0
    for j in range(m.refl_start[b], m.refl_start[b + 1]):
        c = m.refl_pos[j] + shift
        rel = m.refl_int[j]
        for i in range(n):
            asym = alpha if m.xs[i] >= c else 1.0
            zg = (m.xs[i] - c) / (asym * work[i])
            args[i] = -FOUR_LN2 * zg * zg
        bs_vexp(n, args, args)
        for i in range(n):
            asym = alpha if m.xs[i] >= c else 1.0
            zl = (m.xs[i] - c) / (asym * work[n + i])
            out[i] = out[i] + rel * ((1.0 - r) * args[i] + r / (1.0 + 4.0 * zl * zl))
    for i in range(n):
        out[i] = amp * out[i]
    return fault


cdef double finish_energy(Model *m, double *th, double *contrib, uint8_t *faults,
                          int block, double *newc, int newfault, double *f,
                          double *cum) noexcept nogil:
    """Sum blocks (``block`` replaced by ``newc``), add background, return per-point energy."""
    cdef int n = m.n, b
    cdef double e, k, var
    cdef double *src
    for b in range(m.nblocks):
        if b == block:
            if newfault:
                return INFINITY
        elif faults[b]:
            return INFINITY
    # blocks are added in index order so every backend sums identically
    for b in range(m.nblocks):
        src = newc if b == block else contrib + b * n
        if b == 0:
            memcpy(f, src, n * sizeof(double))
        else:
            bs_add(n, f, src)
    if m.nblocks == 0:
        memset(f, 0, n * sizeof(double))
    if m.family == 2:
        bs_shirley(n, m.xs, f, cum, th[m.d - 2], th[m.d - 1])
    if not bs_all_finite(n, f):
        return INFINITY
    k = 1.0 if m.literal else 2.0
    if m.noise == 4:
        return 0.0
    if m.noise == 0:
        e = bs_e_gauss(n, m.ys, f, m.noise_params[0] * m.noise_params[0])
    elif m.noise == 1:
        if not bs_all_positive(n, f):
            return INFINITY
        e = bs_e_poisson(n, m.ys, f, cum)
    elif m.noise == 2:
        e = bs_e_hetero(n, m.ys, f, cum, 1.0, 0.0, 0.0, k)
    else:
        e = bs_e_hetero(n, m.ys, f, cum, m.noise_params[1] * m.noise_params[1],
                        m.noise_params[2] * m.noise_params[2],
                        m.noise_params[3] * m.noise_params[3], k)
    e = e / n
    if isnan(e):
        return INFINITY
    return e


cdef inline double target(double e, double lp, double beta, int n) noexcept nogil:
    if beta == 0:
        return lp
    return -beta * (n * e) + lp


cdef Model make_model(km, double[::1] xs, double[::1] ys, double[::1] noise_params,
                      int64_t[::1] block_of, int64_t[::1] prior_kind, double[::1] pa,
                      double[::1] pb, double[::1] pc, double[::1] tan_h, double[::1] sec_h,
                      int64_t[::1] refl_start, double[::1] refl_pos, double[::1] refl_int):
    cdef Model m
    m.family = km.family
    m.n = km.n
    m.d = km.d
    m.nblocks = km.nblocks
    m.noise = km.noise
    m.literal = km.literal
    m.nphase = km.nphase
    m.degree = km.degree
    m.xs = &xs[0]
    m.ys = &ys[0]
    m.noise_params = &noise_params[0]
    m.block_of = &block_of[0]
    m.prior_kind = &prior_kind[0]
    m.pa = &pa[0]
    m.pb = &pb[0]
    m.pc = &pc[0]
    m.tan_h = &tan_h[0]
    m.sec_h = &sec_h[0]
    m.refl_start = &refl_start[0]
    m.refl_pos = &refl_pos[0] if refl_pos.shape[0] > 0 else NULL
    m.refl_int = &refl_int[0] if refl_int.shape[0] > 0 else NULL
    return m


cdef Model model_from(km):
    return make_model(km, km.xs, km.ys, km.noise_params, km.block_of, km.prior_kind,
                      km.prior_a, km.prior_b, km.prior_c, km.tan_h, km.sec_h,
                      km.refl_start, km.refl_pos, km.refl_int)


def batch_evaluate(km, double[:, ::1] thetas, int workers=1):
    cdef Model m = model_from(km)
    cdef Py_ssize_t M = thetas.shape[0], c
    cdef int n = m.n, nb = m.nblocks, d = m.d, b, i
    energies = np.empty(M)
    logprior = np.empty(M)
    cdef double[::1] ev = energies
    cdef double[::1] lv = logprior
    cdef double *contrib
    cdef double *f
    cdef double *work
    cdef uint8_t *faults
    cdef double lp
    with nogil:
        for c in prange(M, num_threads=workers, schedule="dynamic"):
            contrib = <double *> malloc(sizeof(double) * (nb * n + 5 * n))
            faults = <uint8_t *> malloc(sizeof(uint8_t) * (nb + 1))
            f = contrib + nb * n
            work = f + n
            for b in range(nb):
                faults[b] = block_eval(&m, &thetas[c, 0], b, contrib + b * n, work)
            ev[c] = finish_energy(&m, &thetas[c, 0], contrib, faults, -1, NULL, 0, f, work + 3 * n)
            lp = 0.0
            for i in range(d):
                lp = lp + lp_comp(&m, i, thetas[c, i])
            lv[c] = lp
            free(faults)
            free(contrib)
    return energies, logprior


def run_chains(km, double[:, ::1] theta, double[::1] energy, double[::1] logprior,
               double[::1] beta, double[:, ::1] step, uint64_t[::1] keys, uint64_t counter0,
               int n_sweeps, int adapt_sweeps, long adapt_t0, double c0, int workers,
               rec_theta, rec_energy, rec_lp, uint8_t[:, :, ::1] accepted,
               contrib, faults, bint cache_valid):
    cdef Model m = model_from(km)
    cdef Py_ssize_t M = theta.shape[0], ch
    cdef int n = m.n, nb = m.nblocks, d = m.d
    cdef bint record = rec_theta is not None
    cdef bint use_cache = contrib is not None
    cdef double[:, :, ::1] rth
    cdef double[:, ::1] ren
    cdef double[:, ::1] rlp
    cdef double[:, :, ::1] cc
    cdef uint8_t[:, ::1] cf
    if record:
        rth = rec_theta
        ren = rec_energy
        rlp = rec_lp
    else:
        rth = np.empty((1, 1, 1))
        ren = np.empty((1, 1))
        rlp = np.empty((1, 1))
    if use_cache:
        cc = contrib
        cf = faults
    else:
        cc = np.empty((1, 1, 1))
        cf = np.empty((1, 1), dtype=np.uint8)
    cdef double *blocks
    cdef double *newc
    cdef double *f
    cdef double *work
    cdef double *lpc
    cdef double *cum
    cdef uint8_t *fb
    cdef double *th
    cdef double *st
    cdef int j, i, b, q, nf, acc
    cdef double e, lp, e_new, lp_new, lpi, z, u, prop, old, la, gain, bt
    cdef uint64_t key, ctr
    with nogil:
        for ch in prange(M, num_threads=workers, schedule="dynamic"):
            blocks = <double *> malloc(sizeof(double) * (nb * n + 6 * n + d))
            fb = <uint8_t *> malloc(sizeof(uint8_t) * (nb + 1))
            newc = blocks + nb * n
            f = newc + n
            work = f + n
            cum = work + 3 * n
            lpc = cum + n
            th = &theta[ch, 0]
            st = &step[ch, 0]
            key = keys[ch]
            bt = beta[ch]
            e = energy[ch]
            if use_cache and cache_valid:
                for q in range(nb * n):
                    blocks[q] = cc[ch, q // n, q % n]
                for b in range(nb):
                    fb[b] = cf[ch, b]
            else:
                for b in range(nb):
                    fb[b] = block_eval(&m, th, b, blocks + b * n, work)
            lp = 0.0
            for i in range(d):
                lpc[i] = lp_comp(&m, i, th[i])
                lp = lp + lpc[i]
            for j in range(n_sweeps):
                gain = 0.0
                if j < adapt_sweeps:
                    gain = c0 * pow(<double>(adapt_t0 + j), -0.6)
                for i in range(d):
                    ctr = counter0 + <uint64_t>(3 * (j * d + i))
                    z = rnorm(key, ctr)
                    u = runif(key, ctr + 2)
                    old = th[i]
                    prop = old + st[i] * z
                    lpi = lp_comp(&m, i, prop)
                    lp_new = 0.0
                    for q in range(d):
                        if q == i:
                            lp_new = lp_new + lpi
                        else:
                            lp_new = lp_new + lpc[q]
                    e_new = INFINITY
                    b = <int> m.block_of[i]
                    nf = 0
                    if lp_new > -INFINITY:
                        th[i] = prop
                        if b >= 0:
                            nf = block_eval(&m, th, b, newc, work)
                        e_new = finish_energy(&m, th, blocks, fb, b, newc, nf, f, cum)
                        th[i] = old
                    la = target(e_new, lp_new, bt, n) - target(e, lp, bt, n)
                    acc = log(u) < la
                    if acc:
                        th[i] = prop
                        e = e_new
                        lpc[i] = lpi
                        lp = lp_new
                        if b >= 0:
                            for q in range(n):
                                blocks[b * n + q] = newc[q]
                            fb[b] = nf
                    if j < adapt_sweeps:
                        st[i] = st[i] * exp(gain * (acc - 0.5))
                        if st[i] < STEP_MIN:
                            st[i] = STEP_MIN
                        if st[i] > STEP_MAX:
                            st[i] = STEP_MAX
                    accepted[ch, j, i] = acc
                if record:
                    for q in range(d):
                        rth[ch, j, q] = th[q]
                    ren[ch, j] = e
                    rlp[ch, j] = lp
            energy[ch] = e
            logprior[ch] = lp
            if use_cache:
                for q in range(nb * n):
                    cc[ch, q // n, q % n] = blocks[q]
                for b in range(nb):
                    cf[ch, b] = fb[b]
            free(fb)
            free(blocks)
