"""Waste-free sequential Monte Carlo with adaptive tempering.

Each level reweights the ensemble by ``p(D|theta)**dbeta``, resamples
``S = T / n`` ancestors systematically and runs an ``n``-sweep
component-wise Metropolis chain from each.  Every post-sweep state is kept,
so the next ensemble again has exactly ``T`` members.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernel
from .kernel import BlockCache, pack_model, predict_step_size, run_chains
from .models import ModelSpec, Spectrum
from .probability import prior_sample, prior_scales
from .report import RunReport
from .rng import RngStream, derive_key, derive_keys

BISECT_ITERS = 60
BISECT_TOL = 1e-6


class SamplerError(RuntimeError):
    """A sampler could not complete (for instance too many tempering levels)."""


@dataclass
class SmcConfig:
    T: int = 10_000
    n: int = 10
    ess_target: float = 0.5
    max_levels: int = 1000
    seed: int = 0
    workers: int = 1
    betas: tuple | None = None  # forced schedule; must end at 1

    def __post_init__(self):
        if self.n < 1 or self.T < 2:
            raise ValueError("need T >= 2 and n >= 1")
        if self.T % self.n:
            raise ValueError(f"T={self.T} is not divisible by n={self.n}")
        if self.T // self.n < 2:
            raise ValueError("S = T/n must be at least 2")
        if not 0.0 < self.ess_target < 1.0:
            raise ValueError("ess_target must lie in (0, 1)")
        if self.betas is not None:
            b = np.asarray(self.betas, dtype=np.float64)
            if b.size == 0 or b[-1] != 1.0 or np.any(np.diff(np.r_[0.0, b]) <= 0):
                raise ValueError("forced beta schedule must increase strictly from 0 to 1")
            self.betas = tuple(map(float, b))

    @property
    def S(self) -> int:
        return self.T // self.n


@dataclass
class ParticleEnsemble:
    thetas: np.ndarray  # (T, d)
    energies: np.ndarray  # per-point E
    logprior: np.ndarray
    log_weights: np.ndarray
    n_data: int
    beta: float = 0.0

    def __len__(self):
        return len(self.energies)


@dataclass
class LevelDiag:
    beta: float
    ess: float  # ESS of the incremental weights, before resampling
    log_mean_weight: float
    sweeps: int  # component sweeps executed at this level
    size: int  # ensemble size after the level
    acceptance: list = field(default_factory=list)
    step: list = field(default_factory=list)


def incremental_log_weights(ensemble: ParticleEnsemble, delta_beta: float) -> np.ndarray:
    """``-dbeta * N * E``; infinite energies give ``-inf``."""
    if delta_beta < 0:
        raise ValueError("delta_beta must be non-negative")
    if delta_beta == 0:
        return np.zeros(len(ensemble))
    with np.errstate(invalid="ignore"):
        lw = -delta_beta * ensemble.n_data * ensemble.energies
    return np.where(np.isnan(lw), -np.inf, lw)


def ess(log_weights) -> float:
    lw = np.asarray(log_weights, dtype=np.float64)
    if not np.any(np.isfinite(lw)):
        raise ValueError("all weights are zero")
    return float(math.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def _ess_fraction(energies, n_data, dbeta):
    lw = -dbeta * n_data * energies
    return ess(lw) / len(energies)


def next_beta(ensemble: ParticleEnsemble, beta_prev: float, ess_target: float = 0.5) -> float:
    """Largest step keeping the incremental-weight ESS at ``ess_target * T``."""
    if beta_prev >= 1.0:
        raise ValueError("already at beta = 1")
    e = ensemble.energies
    finite = np.isfinite(e)
    if not finite.any():
        raise SamplerError("every particle has infinite energy")
    # shifting by the minimum energy leaves the normalized weights unchanged
    shifted = np.where(finite, e - e[finite].min(), np.inf)
    n = ensemble.n_data
    hi = 1.0 - beta_prev
    with np.errstate(invalid="ignore"):
        if _ess_fraction(shifted, n, hi) >= ess_target:
            return 1.0
        lo = 0.0
        mid = hi
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            g = _ess_fraction(shifted, n, mid) - ess_target
            if abs(g) < BISECT_TOL:
                break
            if g > 0:
                lo = mid
            else:
                hi = mid
    return min(beta_prev + mid, 1.0)


def systematic_resample(log_weights, count: int, rng: RngStream | float) -> np.ndarray:
    """Sorted ancestor indices from one uniform offset and stride ``1/count``."""
    lw = np.asarray(log_weights, dtype=np.float64)
    if not np.any(np.isfinite(lw)):
        raise ValueError("all weights are zero")
    w = np.exp(lw - logsumexp(lw))
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    u0 = rng if isinstance(rng, float) else rng.uniform()
    points = (u0 + np.arange(count)) / count
    idx = np.searchsorted(cdf, points, side="right")
    return np.minimum(idx, len(w) - 1)


def initial_ensemble(spec: ModelSpec, data: Spectrum, cfg: SmcConfig, km=None) -> ParticleEnsemble:
    km = km or pack_model(spec, data)
    gen = np.random.Generator(np.random.Philox(key=derive_key(cfg.seed, "smc", "init")))
    thetas = np.ascontiguousarray(prior_sample(spec, gen, cfg.T))
    e, lp = kernel.batch_evaluate(km, thetas, cfg.workers)
    return ParticleEnsemble(thetas, e, lp, np.zeros(cfg.T), data.n)


def wastefree_level(ensemble: ParticleEnsemble, beta_next: float, cfg: SmcConfig,
                    step_sizes: np.ndarray, km, level: int) -> tuple[ParticleEnsemble, LevelDiag]:
    """Reweight to ``beta_next``, resample ``S`` ancestors and move them ``n`` sweeps each."""
    T, S, n = cfg.T, cfg.S, cfg.n
    lw = ensemble.log_weights + incremental_log_weights(ensemble, beta_next - ensemble.beta)
    log_mean = float(logsumexp(lw) - math.log(T))
    level_ess = ess(lw)
    rs = RngStream(derive_key(cfg.seed, "smc", "resample", level))
    anc = systematic_resample(lw, S, rs)
    theta = np.ascontiguousarray(ensemble.thetas[anc])
    energy = ensemble.energies[anc].copy()
    logprior = ensemble.logprior[anc].copy()
    d = theta.shape[1]
    step = np.empty((S, d))
    step[:] = step_sizes
    keys = derive_keys(cfg.seed, "smc", "move", level, count=S)
    adapt = math.ceil(n / 2)
    res = run_chains(km, theta, energy, logprior, np.full(S, beta_next), step, keys,
                     n_sweeps=n, adapt_sweeps=adapt, record=True, workers=cfg.workers,
                     cache=BlockCache.empty(km, S))
    out = ParticleEnsemble(
        thetas=res.trace_theta.reshape(T, d),
        energies=res.trace_energy.reshape(T),
        logprior=res.trace_logprior.reshape(T),
        log_weights=np.zeros(T),
        n_data=ensemble.n_data,
        beta=beta_next,
    )
    # acceptance after adaptation pairs with the final (frozen) step sizes
    frozen = res.accepted[:, adapt:] if n > adapt else res.accepted
    acc = frozen.reshape(-1, d).mean(axis=0)
    geo_step = np.exp(np.log(step).mean(axis=0))
    diag = LevelDiag(beta_next, level_ess, log_mean, S * n, len(out),
                     acc.tolist(), geo_step.tolist())
    return out, diag


def smc_run(spec: ModelSpec, data: Spectrum, cfg: SmcConfig) -> RunReport:
    t0 = time.perf_counter()
    km = pack_model(spec, data)
    ens = initial_ensemble(spec, data, cfg, km)
    scales = prior_scales(spec)
    history = []
    levels: list[LevelDiag] = []
    forced = list(cfg.betas) if cfg.betas is not None else None
    while ens.beta < 1.0:
        if len(levels) >= cfg.max_levels:
            raise SamplerError(
                f"tempering did not reach beta=1 within {cfg.max_levels} levels "
                f"(beta={ens.beta:.3g})")
        if forced is not None:
            beta_next = forced[len(levels)]
        else:
            beta_next = next_beta(ens, ens.beta, cfg.ess_target)
        steps = predict_step_size(history, beta_next, scales)
        ens, diag = wastefree_level(ens, beta_next, cfg, steps, km, len(levels))
        levels.append(diag)
        history.append((diag.beta, np.array(diag.acceptance), np.array(diag.step)))
    free_energy = -math.fsum(lv.log_mean_weight for lv in levels)
    elapsed = time.perf_counter() - t0
    flags = [] if math.isfinite(free_energy) else ["non-finite free energy"]
    return RunReport(
        sampler="smc",
        free_energy=free_energy,
        names=list(spec.names),
        samples=ens.thetas,
        ladder=[0.0] + [lv.beta for lv in levels],
        levels=[vars(lv) for lv in levels],
        acceptance=levels[-1].acceptance,
        timings={"sampling": elapsed},
        flags=flags,
        config={"T": cfg.T, "n": cfg.n, "ess_target": cfg.ess_target,
                "max_levels": cfg.max_levels},
        seed=cfg.seed,
        workers=cfg.workers,
        backend=kernel.backend_name(),
    )
