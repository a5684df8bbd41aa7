"""Pure numpy implementation of the sampling kernels.

Vectorised across chains: every component update is a handful of array
operations over ``(chains, data points)``.  Chains are processed in chunks,
optionally on a thread pool; chains never interact, so the chunking has no
effect on the results.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .models import XpsShirley, block_contribution, shirley_batch
from .probability import component_logpdf, pointwise_energy
from .rng import normals, uniforms

NAME = "python"
CHUNK_ELEMENTS = 1 << 22  # chains * blocks * points held per chunk
STEP_MIN, STEP_MAX = 1e-12, 1e12


def _chunks(m: int, per_chain: int):
    size = max(1, CHUNK_ELEMENTS // max(per_chain, 1))
    return [slice(s, min(s + size, m)) for s in range(0, m, size)]


def _map(fn, slices, workers):
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fn, slices))
    else:
        for sl in slices:
            fn(sl)


def _all_blocks(km, th):
    m = len(th)
    contrib = np.empty((m, km.nblocks, km.n))
    faults = np.zeros((m, km.nblocks), dtype=bool)
    for b in range(km.nblocks):
        contrib[:, b], faults[:, b] = block_contribution(km.spec.family, th, b, km.xs, km.trig)
    return contrib, faults


def _energy_from_blocks(km, th, contrib, faults, block=-1, newc=None, newfault=None):
    m = len(th)
    f = np.zeros((m, km.n))
    for b in range(km.nblocks):
        f += newc if b == block else contrib[:, b]
    bad = faults.copy()
    if block >= 0:
        bad[:, block] = newfault
    if isinstance(km.spec.family, XpsShirley):
        with np.errstate(invalid="ignore"):
            f = f + shirley_batch(km.xs, f, th[:, -2], th[:, -1])
    e = pointwise_energy(km.spec.noise, f, km.ys).sum(axis=1) / km.n
    e[bad.any(axis=1)] = np.inf
    return e


def _logprior_components(km, th):
    out = np.empty_like(th)
    for i in range(km.d):
        out[:, i] = component_logpdf(km.prior_kind[i], km.prior_a[i], km.prior_b[i],
                                     km.prior_c[i], th[:, i])
    return out


def _sum_components(lpc):
    total = np.zeros(len(lpc))
    for i in range(lpc.shape[1]):
        total = total + lpc[:, i]
    return total


def batch_evaluate(km, thetas, workers=1):
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    m = len(thetas)
    energies = np.empty(m)
    logprior = np.empty(m)

    def work(sl):
        th = thetas[sl]
        contrib, faults = _all_blocks(km, th)
        energies[sl] = _energy_from_blocks(km, th, contrib, faults)
        logprior[sl] = _sum_components(_logprior_components(km, th))

    _map(work, _chunks(m, km.nblocks * km.n), workers)
    return energies, logprior


def _target(e_total, lp, beta):
    with np.errstate(invalid="ignore"):
        return np.where(beta == 0, lp, -beta * e_total + lp)


def run_chains(km, theta, energy, logprior, beta, step, keys, counter0, n_sweeps,
               adapt_sweeps, adapt_t0, c0, workers, rec_theta, rec_energy, rec_lp,
               accepted, contrib, faults, cache_valid):
    m, d = theta.shape
    record = rec_theta is not None
    use_cache = contrib is not None
    block_of = km.block_of

    def work(sl):
        th = theta[sl].copy()
        e = energy[sl].copy()
        bt = beta[sl]
        st = step[sl].copy()
        ky = keys[sl]
        if use_cache and cache_valid:
            cb, fb = contrib[sl].copy(), faults[sl].astype(bool)
        else:
            cb, fb = _all_blocks(km, th)
        lpc = _logprior_components(km, th)
        lp = _sum_components(lpc)
        for j in range(n_sweeps):
            adapting = j < adapt_sweeps
            if adapting:
                gamma = c0 * (adapt_t0 + j) ** -0.6
            for i in range(d):
                ctr = np.uint64(counter0 + 3 * (j * d + i))
                z = normals(ky, np.full(len(ky), ctr, dtype=np.uint64))
                u = uniforms(ky, np.full(len(ky), ctr + np.uint64(2), dtype=np.uint64))
                prop = th[:, i] + st[:, i] * z
                lpc_i = component_logpdf(km.prior_kind[i], km.prior_a[i], km.prior_b[i],
                                         km.prior_c[i], prop)
                lpc_new = lpc.copy()
                lpc_new[:, i] = lpc_i
                lp_new = _sum_components(lpc_new)
                ok = np.flatnonzero(lp_new > -np.inf)
                e_new = np.full(len(th), np.inf)
                b = block_of[i]
                newc = newf = None
                if ok.size:
                    thp = th[ok]
                    thp[:, i] = prop[ok]
                    if b >= 0:
                        newc, newf = block_contribution(km.spec.family, thp, b, km.xs, km.trig)
                        e_new[ok] = _energy_from_blocks(km, thp, cb[ok], fb[ok], b, newc, newf)
                    else:
                        e_new[ok] = _energy_from_blocks(km, thp, cb[ok], fb[ok])
                with np.errstate(invalid="ignore", divide="ignore"):
                    log_alpha = _target(km.n * e_new, lp_new, bt) - _target(km.n * e, lp, bt)
                    acc = np.log(u) < log_alpha
                if acc.any():
                    th[acc, i] = prop[acc]
                    e[acc] = e_new[acc]
                    lpc[acc, i] = lpc_i[acc]
                    lp[acc] = lp_new[acc]
                    if b >= 0:
                        acc_ok = acc[ok]
                        rows = ok[acc_ok]
                        cb[rows, b] = newc[acc_ok]
                        fb[rows, b] = newf[acc_ok]
                if adapting:
                    st[:, i] = np.clip(st[:, i] * np.exp(gamma * (acc - 0.5)), STEP_MIN, STEP_MAX)
                if accepted is not None:
                    accepted[sl, j, i] = acc
            if record:
                rec_theta[sl, j] = th
                rec_energy[sl, j] = e
                rec_lp[sl, j] = lp
        theta[sl] = th
        energy[sl] = e
        logprior[sl] = lp
        step[sl] = st
        if use_cache:
            contrib[sl] = cb
            faults[sl] = fb

    _map(work, _chunks(m, km.nblocks * km.n), workers)
