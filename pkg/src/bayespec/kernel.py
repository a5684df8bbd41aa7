"""Component-wise random-walk Metropolis-Hastings and step-size control.

The heavy lifting lives in a backend module exposing ``run_chains`` and
``batch_evaluate``.  The compiled extension ``bayespec._core`` is preferred;
the numpy implementation in ``bayespec._fallback`` is used when the
extension is not built.  :func:`use_backend` switches explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fallback
from .models import (
    GaussianMixture,
    ModelSpec,
    Polynomial,
    Spectrum,
    XpsShirley,
    XrdPseudoVoigt,
    block_layout,
    check_theta,
    xrd_trig,
)
from .probability import noise_code, prior_constants, prior_scales
from .rng import RngStream

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

STEP_MIN, STEP_MAX = 1e-12, 1e12
TARGET_ACCEPT = 0.5
RM_EXPONENT = 0.6
ADJUST_KAPPA = 2.0
HISTORY_WINDOW = 5

_BACKENDS = {"python": _fallback}
if _core is not None:
    _BACKENDS["cython"] = _core
_active = _BACKENDS.get("cython", _fallback)


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def backend_name() -> str:
    return _active.NAME


def use_backend(name: str) -> str:
    """Select the kernel backend by name; returns the previously active one."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable (have {available_backends()})")
    previous = _active.NAME
    _active = _BACKENDS[name]
    return previous


# ---------------------------------------------------------------- packed model

_FAMILY_CODES = {GaussianMixture: 0, XrdPseudoVoigt: 1, XpsShirley: 2, Polynomial: 3}


@dataclass(eq=False)
class KernelModel:
    """Flat array view of a ``ModelSpec`` bound to one spectrum."""

    spec: ModelSpec
    family: int
    n: int
    d: int
    nblocks: int
    noise: int
    literal: int
    nphase: int
    degree: int
    xs: np.ndarray
    ys: np.ndarray
    noise_params: np.ndarray
    block_of: np.ndarray
    prior_kind: np.ndarray
    prior_a: np.ndarray
    prior_b: np.ndarray
    prior_c: np.ndarray
    tan_h: np.ndarray
    sec_h: np.ndarray
    refl_start: np.ndarray
    refl_pos: np.ndarray
    refl_int: np.ndarray

    @property
    def trig(self):
        return (self.tan_h, self.sec_h) if self.family == 1 else None


def pack_model(spec: ModelSpec, data: Spectrum) -> KernelModel:
    fam = spec.family
    nblocks, block_of = block_layout(fam)
    code, params, literal = noise_code(spec.noise)
    kind, a, b, c = prior_constants(spec.priors)
    xs = np.array(data.xs, dtype=np.float64)  # writable copies for the extension
    nphase = degree = 0
    tan_h = sec_h = np.zeros(len(xs))
    starts, pos, inten = [0], [], []
    if isinstance(fam, XrdPseudoVoigt):
        nphase = len(fam.phases)
        tan_h, sec_h = xrd_trig(xs)
        for ph in fam.phases:
            pos.extend(ph.positions)
            inten.extend(ph.intensities)
            starts.append(len(pos))
    if isinstance(fam, Polynomial):
        degree = fam.degree
    return KernelModel(
        spec=spec, family=_FAMILY_CODES[type(fam)], n=len(xs), d=spec.dim,
        nblocks=nblocks, noise=code, literal=literal, nphase=nphase, degree=degree,
        xs=xs, ys=np.array(data.ys, dtype=np.float64),
        noise_params=params, block_of=np.ascontiguousarray(block_of, dtype=np.int64),
        prior_kind=kind, prior_a=a, prior_b=b, prior_c=c,
        tan_h=np.ascontiguousarray(tan_h), sec_h=np.ascontiguousarray(sec_h),
        refl_start=np.array(starts, dtype=np.int64),
        refl_pos=np.array(pos, dtype=np.float64), refl_int=np.array(inten, dtype=np.float64),
    )


def batch_evaluate(km: KernelModel, thetas, workers: int = 1):
    """Per-point energies and prior log densities of ``(M, d)`` parameters."""
    thetas = np.ascontiguousarray(np.atleast_2d(thetas), dtype=np.float64)
    return _active.batch_evaluate(km, thetas, int(workers))


@dataclass
class ChainResult:
    accepted: np.ndarray  # (M, n_sweeps, d) bool
    trace_theta: np.ndarray | None = None  # (M, n_sweeps, d)
    trace_energy: np.ndarray | None = None
    trace_logprior: np.ndarray | None = None


@dataclass
class BlockCache:
    """Per-chain block contributions kept between kernel calls."""

    contrib: np.ndarray
    faults: np.ndarray
    valid: bool = False

    @classmethod
    def empty(cls, km: KernelModel, m: int) -> "BlockCache":
        return cls(np.zeros((m, km.nblocks, km.n)), np.zeros((m, km.nblocks), dtype=np.uint8))

    def permute(self, order: np.ndarray) -> None:
        self.contrib[:] = self.contrib[order]
        self.faults[:] = self.faults[order]


def run_chains(km: KernelModel, theta, energy, logprior, beta, step, keys, *,
               counter0: int = 0, n_sweeps: int = 1, adapt_sweeps: int = 0,
               adapt_t0: int = 1, c0: float = 1.0, record: bool = False,
               workers: int = 1, cache: BlockCache | None = None) -> ChainResult:
    """Advance ``M`` independent chains by ``n_sweeps`` component sweeps.

    ``theta`` (M, d), ``energy`` (M,), ``logprior`` (M,) and ``step`` (M, d)
    are updated in place.  Chain ``m`` draws its randomness from stream
    ``keys[m]`` at counters ``counter0 + 3 * (sweep * d + component) + {0, 1, 2}``.
    During the first ``adapt_sweeps`` sweeps the step sizes follow a
    Robbins-Monro recursion with gain ``c0 * t**-0.6``, ``t = adapt_t0 + sweep``.
    """
    m, d = theta.shape
    beta = np.array(beta, dtype=np.float64)  # read only; a private copy keeps views usable
    for arr in (theta, energy, logprior, step):
        if arr.dtype != np.float64 or not arr.flags.c_contiguous:
            raise TypeError("chain state arrays must be C-contiguous float64")
    accepted = np.zeros((m, n_sweeps, d), dtype=np.uint8)
    rec = (np.empty((m, n_sweeps, d)), np.empty((m, n_sweeps)), np.empty((m, n_sweeps))) \
        if record else (None, None, None)
    _active.run_chains(
        km, theta, energy, logprior, beta, step,
        np.ascontiguousarray(keys, dtype=np.uint64), int(counter0), int(n_sweeps),
        int(adapt_sweeps), int(adapt_t0), float(c0), int(workers), *rec, accepted,
        None if cache is None else cache.contrib, None if cache is None else cache.faults,
        bool(cache is not None and cache.valid),
    )
    if cache is not None:
        cache.valid = True
    return ChainResult(accepted.astype(bool), *rec)


# ---------------------------------------------------------------- step sizes

@dataclass
class StepState:
    step_sizes: np.ndarray
    accept_counts: np.ndarray = None
    propose_counts: np.ndarray = None
    history: list = field(default_factory=list)  # (beta, acceptance rates, step sizes)

    def __post_init__(self):
        self.step_sizes = np.asarray(self.step_sizes, dtype=np.float64).copy()
        d = len(self.step_sizes)
        if self.accept_counts is None:
            self.accept_counts = np.zeros(d, dtype=np.int64)
        if self.propose_counts is None:
            self.propose_counts = np.zeros(d, dtype=np.int64)
        if np.any(self.step_sizes <= 0):
            raise ValueError("step sizes must be positive")

    @classmethod
    def from_prior(cls, spec: ModelSpec) -> "StepState":
        return cls(prior_scales(spec))

    def record(self, accepted: np.ndarray) -> None:
        """Add ``(..., d)`` boolean accept flags to the running tallies."""
        acc = np.asarray(accepted).reshape(-1, len(self.step_sizes))
        self.accept_counts += acc.sum(axis=0)
        self.propose_counts += len(acc)

    @property
    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(self.propose_counts > 0,
                            self.accept_counts / np.maximum(self.propose_counts, 1), np.nan)


def cw_mh_sweep(theta, energy_cache: float, spec: ModelSpec, data: Spectrum, beta: float,
                steps: StepState, rng: RngStream, adapt_t: int | None = None):
    """One component-wise sweep of a single chain.

    Returns ``(theta', energy', accept_flags)``.  When ``adapt_t`` is given
    the step sizes in ``steps`` are Robbins-Monro updated during the sweep.
    """
    theta = check_theta(spec, theta).copy()[None, :]
    km = pack_model(spec, data)
    e = np.array([float(energy_cache)])
    _, lp = batch_evaluate(km, theta)
    st = steps.step_sizes[None, :].copy()
    res = run_chains(km, theta, e, lp, np.array([float(beta)]), st, [rng.key],
                     counter0=rng.counter, adapt_sweeps=0 if adapt_t is None else 1,
                     adapt_t0=adapt_t or 1)
    rng.counter += 3 * spec.dim
    steps.step_sizes[:] = st[0]
    steps.record(res.accepted[0])
    return theta[0], float(e[0]), res.accepted[0, 0]


def robbins_monro_update(steps: StepState, component: int, accepted: bool, t: int,
                         c0: float = 1.0, target: float = TARGET_ACCEPT) -> StepState:
    """``log s += c0 t^-0.6 (1{accepted} - target)``, clamped to [1e-12, 1e12]."""
    if t < 1:
        raise ValueError("t must be >= 1")
    gain = c0 * t ** -RM_EXPONENT
    s = steps.step_sizes[component] * math.exp(gain * (float(accepted) - target))
    steps.step_sizes[component] = min(max(s, STEP_MIN), STEP_MAX)
    return steps


def predict_step_size(history, beta_next: float, prior_scale, window: int = HISTORY_WINDOW):
    """Step sizes for the next temperature from past ``(beta, acc, step)`` records.

    Each past step is first corrected towards the target acceptance,
    ``s * exp(2 (acc - 0.5))``; a straight line in ``(log beta, log s)`` over
    the most recent ``window`` records is then evaluated at ``beta_next``.
    Without history the prior scale is returned.  Results are capped at the
    prior scale and clamped to [1e-12, 1e12].
    """
    prior_scale = np.asarray(prior_scale, dtype=np.float64)
    if not history:
        return np.clip(prior_scale.copy(), STEP_MIN, STEP_MAX)
    recent = history[-window:]
    lb = np.log([h[0] for h in recent])
    acc = np.array([np.asarray(h[1], dtype=np.float64) for h in recent])
    s = np.array([np.asarray(h[2], dtype=np.float64) for h in recent])
    acc = np.where(np.isfinite(acc), acc, TARGET_ACCEPT)
    ls = np.log(s) + ADJUST_KAPPA * (acc - TARGET_ACCEPT)
    if len(recent) >= 2 and np.ptp(lb) > 0:
        x = lb - lb.mean()
        slope = (x[:, None] * (ls - ls.mean(axis=0))).sum(axis=0) / (x * x).sum()
        pred = ls.mean(axis=0) + slope * (math.log(beta_next) - lb.mean())
    else:
        pred = ls.mean(axis=0)
    out = np.exp(pred)
    out = np.minimum(out, prior_scale)
    return np.clip(out, STEP_MIN, STEP_MAX)
