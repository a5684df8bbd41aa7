"""Replica-exchange Monte Carlo with free energy from adjacent-temperature ratios.

Replica ``l`` samples ``p(D|theta)**beta_l p(theta)``.  After burn-in the
ratio ``Z(beta_{l+1}) / Z(beta_l)`` is estimated by the mean of
``exp(-(beta_{l+1} - beta_l) N E_l)`` over the states of replica ``l``, and
``F = -sum_l log(ratio_l)``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .kernel import BlockCache, pack_model, run_chains
from .models import ModelSpec, Spectrum
from .probability import prior_sample, prior_scales
from .report import RunReport
from .rng import derive_key, derive_keys, uniforms


def geometric_ladder(L: int, beta_min: float = 1e-5) -> np.ndarray:
    """``beta_0 = 0`` followed by ``L`` geometrically spaced values from ``beta_min`` to 1."""
    if L < 1:
        raise ValueError("ladder needs L >= 1")
    if L == 1:
        return np.array([0.0, 1.0])
    return np.concatenate([[0.0], np.geomspace(beta_min, 1.0, L)])


def check_ladder(ladder) -> np.ndarray:
    b = np.asarray(ladder, dtype=np.float64)
    if b.ndim != 1 or len(b) < 2:
        raise ValueError("ladder needs at least two temperatures")
    if b[0] != 0.0 or b[-1] != 1.0:
        raise ValueError("ladder must start at 0 and end at 1")
    if np.any(np.diff(b) <= 0):
        raise ValueError("ladder must be strictly increasing")
    return b


@dataclass
class RemcConfig:
    L: int = 44
    ladder: tuple | None = None
    total_sweeps: int = 10_000
    burn_in_fraction: float = 0.5
    swap_period: int = 1
    seed: int = 0
    workers: int = 1
    swaps: bool = True
    beta_min: float = 1e-5

    def __post_init__(self):
        if self.ladder is None:
            self.ladder = tuple(geometric_ladder(self.L, self.beta_min))
        self.ladder = tuple(map(float, check_ladder(self.ladder)))
        self.L = len(self.ladder) - 1
        if not 0.0 < self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in (0, 1)")
        if self.swap_period < 1:
            raise ValueError("swap_period must be >= 1")
        if self.total_sweeps < 2:
            raise ValueError("need at least two sweeps")

    @property
    def burn_in(self) -> int:
        return int(round(self.burn_in_fraction * self.total_sweeps))


@dataclass
class PairAccumulator:
    """Running mean of ``exp(-dbeta_l N E_l)`` per adjacent pair, kept as
    ``exp(shift) * scaled`` so that large negative exponents never underflow."""

    shift: np.ndarray
    scaled: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, pairs: int) -> "PairAccumulator":
        return cls(np.full(pairs, -np.inf), np.zeros(pairs), 0)

    @classmethod
    def from_means(cls, means) -> "PairAccumulator":
        with np.errstate(divide="ignore"):
            shift = np.log(np.asarray(means, dtype=np.float64))
        return cls(shift, np.where(np.isfinite(shift), 1.0, 0.0), 1)

    def add(self, log_terms: np.ndarray) -> None:
        x = np.asarray(log_terms, dtype=np.float64)
        new = np.maximum(self.shift, x)
        finite = np.isfinite(new)
        safe = np.where(finite, new, 0.0)
        with np.errstate(invalid="ignore"):
            old = np.where(np.isfinite(self.shift), self.scaled * np.exp(self.shift - safe), 0.0)
            cur = np.where(np.isfinite(x), np.exp(x - safe), 0.0)
        self.scaled = np.where(finite, old + cur, 0.0)
        self.shift = new
        self.count += 1

    def log_means(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return self.shift + np.log(self.scaled) - math.log(self.count)


def free_energy_remc(acc: PairAccumulator) -> float:
    """``-sum_l log(mean_l)``; NaN when some pair mean is zero or undefined."""
    if acc.count < 1 or len(acc.shift) == 0:
        raise ValueError("accumulator holds no retained sweeps")
    lm = acc.log_means()
    if not np.all(np.isfinite(lm)):
        return math.nan
    return -math.fsum(lm)


def swap_alpha(dbeta, de_total):
    """Swap acceptance ``min(1, exp(dbeta * (E*_{l+1} - E*_l)))``; NaN inputs give 0."""
    with np.errstate(invalid="ignore", over="ignore"):
        x = dbeta * np.asarray(de_total, dtype=np.float64)
        a = np.exp(np.minimum(x, 0.0))
    return np.where(np.isnan(a), 0.0, a)


@dataclass
class RemcState:
    betas: np.ndarray
    theta: np.ndarray  # (R, d), row l at betas[l]
    energy: np.ndarray
    logprior: np.ndarray
    step: np.ndarray  # (R, d), belongs to the temperature, not the state
    n_data: int
    swap_attempts: np.ndarray = None
    swap_accepts: np.ndarray = None
    cache: BlockCache | None = None

    def __post_init__(self):
        pairs = len(self.betas) - 1
        if self.swap_attempts is None:
            self.swap_attempts = np.zeros(pairs, dtype=np.int64)
        if self.swap_accepts is None:
            self.swap_accepts = np.zeros(pairs, dtype=np.int64)


def swap_step(state: RemcState, parity: int, uniforms_: np.ndarray) -> RemcState:
    """Attempt swaps on pairs ``(l, l+1)`` with ``l % 2 == parity``.

    ``uniforms_`` holds one uniform per pair (unused entries ignored).
    Only states move; step sizes stay with their temperature.
    """
    pairs = np.arange(parity, len(state.betas) - 1, 2)
    if pairs.size == 0:
        return state
    dbeta = state.betas[pairs + 1] - state.betas[pairs]
    n = state.n_data
    de = n * state.energy[pairs + 1] - n * state.energy[pairs]
    alpha = swap_alpha(dbeta, de)
    ok = np.asarray(uniforms_)[pairs] < alpha
    state.swap_attempts[pairs] += 1
    state.swap_accepts[pairs[ok]] += 1
    lo = pairs[ok]
    if lo.size:
        order = np.arange(len(state.betas))
        order[lo], order[lo + 1] = lo + 1, lo
        state.theta[:] = state.theta[order]
        state.energy[:] = state.energy[order]
        state.logprior[:] = state.logprior[order]
        if state.cache is not None:
            state.cache.permute(order)
    return state


def remc_run(spec: ModelSpec, data: Spectrum, cfg: RemcConfig) -> RunReport:
    t0 = time.perf_counter()
    km = pack_model(spec, data)
    betas = np.asarray(cfg.ladder)
    R, d = len(betas), spec.dim
    gen = np.random.Generator(np.random.Philox(key=derive_key(cfg.seed, "remc", "init")))
    theta = np.ascontiguousarray(prior_sample(spec, gen, R))
    energy, logprior = kernel.batch_evaluate(km, theta, cfg.workers)
    step = np.ascontiguousarray(np.tile(prior_scales(spec), (R, 1)))
    state = RemcState(betas, theta, energy, logprior, step, data.n,
                      cache=BlockCache.empty(km, R))
    keys = derive_keys(cfg.seed, "remc", "move", count=R)
    swap_key = np.uint64(derive_key(cfg.seed, "remc", "swap"))
    acc_pairs = PairAccumulator.zeros(R - 1)
    dbeta = np.diff(betas)
    accepted = np.zeros(d)
    proposals = 0
    acc_by_replica = np.zeros((R, d))
    samples = []
    burn = cfg.burn_in
    sweep = 0
    chunk = cfg.swap_period
    n_swaps = 0
    while sweep < cfg.total_sweeps:
        m = min(chunk, cfg.total_sweeps - sweep)
        if sweep < burn:
            m = min(m, burn - sweep)
        adapting = sweep < burn
        res = run_chains(km, state.theta, state.energy, state.logprior, betas, state.step, keys,
                         counter0=3 * d * sweep, n_sweeps=m,
                         adapt_sweeps=m if adapting else 0, adapt_t0=sweep + 1,
                         record=not adapting, workers=cfg.workers, cache=state.cache)
        if not adapting:
            acc_by_replica += res.accepted.sum(axis=1)
            accepted += res.accepted[-1].sum(axis=0)
            proposals += m
            with np.errstate(invalid="ignore"):
                for j in range(m):
                    terms = -dbeta * data.n * res.trace_energy[:-1, j]
                    acc_pairs.add(np.where(np.isnan(terms), -np.inf, terms))
            samples.append(res.trace_theta[-1])
        sweep += m
        if cfg.swaps and R > 1 and sweep % chunk == 0:
            parity = n_swaps % 2
            ctr = np.uint64(n_swaps) * np.uint64(R) + np.arange(R, dtype=np.uint64)
            swap_step(state, parity, uniforms(swap_key, ctr))
            n_swaps += 1
    free_energy = free_energy_remc(acc_pairs)
    flags = [] if math.isfinite(free_energy) else ["non-finite accumulator"]
    elapsed = time.perf_counter() - t0
    kept = cfg.total_sweeps - burn
    with np.errstate(invalid="ignore"):
        swap_rates = state.swap_accepts / np.maximum(state.swap_attempts, 1)
    return RunReport(
        sampler="remc",
        free_energy=free_energy,
        names=list(spec.names),
        samples=np.concatenate(samples) if samples else np.empty((0, d)),
        ladder=betas.tolist(),
        levels=[{"beta": float(b), "acceptance": (acc_by_replica[i] / max(kept, 1)).tolist(),
                 "step": state.step[i].tolist()} for i, b in enumerate(betas)],
        acceptance=(accepted / max(proposals, 1)).tolist(),
        swap_rates=swap_rates.tolist(),
        timings={"sampling": elapsed},
        flags=flags,
        config={"L": cfg.L, "total_sweeps": cfg.total_sweeps,
                "burn_in_fraction": cfg.burn_in_fraction, "swap_period": cfg.swap_period,
                "swaps": cfg.swaps, "beta_min": cfg.beta_min},
        seed=cfg.seed,
        workers=cfg.workers,
        backend=kernel.backend_name(),
    )
