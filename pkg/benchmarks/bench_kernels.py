"""Compare the compiled and numpy kernel backends.

Times ``batch_evaluate`` and ``run_chains`` on the bundled synthetic
families and prints microseconds per evaluation / per proposal for each
backend, plus the speedup.  Usage::

    python benchmarks/bench_kernels.py [--chains 400] [--sweeps 3] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from bayespec import kernel
from bayespec.models import Uniform
from bayespec.rng import derive_keys
from bayespec.synthetic import gen_gaussian_mixture, gen_xps, gen_xrd


def cases():
    d, s, t = gen_gaussian_mixture(3, 0)
    yield "gm3", s, d, np.asarray(t.theta)
    d, s, t = gen_gaussian_mixture(10, 0)
    yield "gm10", s, d, np.asarray(t.theta)
    d, s, t = gen_xrd(1000, 0)
    yield "xrd1000", s, d, np.asarray(t.theta)
    d, s, t = gen_xps(7, 0)
    yield "xps7", s, d, np.asarray(t.theta)


def _start(spec, truth, m, rng):
    # jitter around the truth keeps most proposals inside the support
    th = np.tile(truth, (m, 1)) * (1.0 + 1e-3 * rng.standard_normal((m, len(truth))))
    for i, p in enumerate(spec.priors):
        if isinstance(p, Uniform):
            th[:, i] = np.clip(th[:, i], p.lo, p.hi)
    return np.ascontiguousarray(th)


def time_backend(name, spec, data, truth, chains, sweeps, repeat):
    kernel.use_backend(name)
    km = kernel.pack_model(spec, data)
    rng = np.random.default_rng(0)
    th0 = _start(spec, truth, chains, rng)
    best_eval = best_move = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        e, lp = kernel.batch_evaluate(km, th0)
        best_eval = min(best_eval, time.perf_counter() - t0)
        th = th0.copy()
        step = np.ascontiguousarray(np.tile(np.abs(truth) * 1e-3 + 1e-4, (chains, 1)))
        keys = derive_keys(0, "bench", count=chains)
        t0 = time.perf_counter()
        kernel.run_chains(km, th, e.copy(), lp.copy(), np.ones(chains), step, keys,
                          n_sweeps=sweeps, cache=kernel.BlockCache.empty(km, chains))
        best_move = min(best_move, time.perf_counter() - t0)
    return best_eval / chains * 1e6, best_move / (chains * sweeps * spec.dim) * 1e6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--chains", type=int, default=400)
    ap.add_argument("--sweeps", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernel.available_backends()
    previous = kernel.backend_name()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':8s} {'backend':8s} {'eval us':>10s} {'proposal us':>12s}")
    try:
        for label, spec, data, truth in cases():
            res = {}
            for b in backends:
                res[b] = time_backend(b, spec, data, truth, args.chains, args.sweeps, args.repeat)
                print(f"{label:8s} {b:8s} {res[b][0]:10.2f} {res[b][1]:12.2f}")
            if len(res) == 2:
                ev = res["python"][0] / res["cython"][0]
                mv = res["python"][1] / res["cython"][1]
                print(f"{label:8s} {'speedup':8s} {ev:10.1f}x {mv:11.1f}x")
    finally:
        kernel.use_backend(previous)


if __name__ == "__main__":
    main()
