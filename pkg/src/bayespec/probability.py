"""Priors, energies and the tempered log-target shared by both samplers.

Energies are stored per data point, ``E = -(1/N) log p(D | theta)``, and the
log-likelihood is always ``-N * E``.  ``E = +inf`` is the rejection sentinel:
forward-model faults and non-positive Poisson means never raise inside a
sampler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .models import (
    Flat,
    Gamma,
    GaussianApproxPoisson,
    GaussianFixed,
    ModelSpec,
    Normal,
    Poisson,
    Spectrum,
    Uniform,
    XpsHetero,
    check_theta,
    forward_batch,
)

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class EnergyValue:
    e: float  # per-point mean negative log-likelihood
    n: int

    @property
    def total(self) -> float:
        return self.n * self.e

    def __float__(self):
        return self.e


# ---------------------------------------------------------------- priors

def prior_constants(priors) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(kind, a, b, log_norm)`` arrays used by the vectorised log densities."""
    d = len(priors)
    kind = np.empty(d, dtype=np.int64)
    a = np.empty(d)
    b = np.empty(d)
    c = np.empty(d)
    for i, p in enumerate(priors):
        if isinstance(p, Gamma):
            kind[i], a[i], b[i] = 0, p.shape, p.rate
            c[i] = p.shape * math.log(p.rate) - math.lgamma(p.shape)
        elif isinstance(p, Normal):
            kind[i], a[i], b[i] = 1, p.mean, p.var
            c[i] = -0.5 * math.log(2.0 * math.pi * p.var)
        elif isinstance(p, Uniform):
            kind[i], a[i], b[i] = 2, p.lo, p.hi
            c[i] = -math.log(p.hi - p.lo)
        else:
            raise TypeError(f"unknown prior {p!r}")
    return kind, a, b, c


def component_logpdf(kind: int, a: float, b: float, c: float, x: np.ndarray) -> np.ndarray:
    """Log density of one prior component, vectorised over ``x``."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        if kind == 0:
            pos = x > 0
            return np.where(pos, c + (a - 1.0) * np.log(np.where(pos, x, 1.0)) - b * x, -np.inf)
        if kind == 1:
            dd = x - a
            return c - dd * dd / (2.0 * b)
        return np.where((x >= a) & (x <= b), c, -np.inf)


def prior_logpdf_batch(spec: ModelSpec, thetas: np.ndarray) -> np.ndarray:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    kind, a, b, c = prior_constants(spec.priors)
    total = np.zeros(len(thetas))
    for i in range(spec.dim):
        total = total + component_logpdf(kind[i], a[i], b[i], c[i], thetas[:, i])
    return total


def prior_logpdf(spec: ModelSpec, theta) -> float:
    """Sum of per-component prior log densities; ``-inf`` outside the support."""
    theta = check_theta(spec, theta)
    return float(prior_logpdf_batch(spec, theta[None, :])[0])


def gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if x <= 0:
        return -math.inf
    return shape * math.log(rate) - gammaln(shape) + (shape - 1) * math.log(x) - rate * x


def prior_sample(spec: ModelSpec, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Independent draws from every prior component.

    Returns a ``(d,)`` vector, or ``(size, d)`` when ``size`` is given.
    Columns are drawn in layout order, so the result depends only on the
    generator state.
    """
    n = 1 if size is None else int(size)
    out = np.empty((n, spec.dim))
    for i, p in enumerate(spec.priors):
        if isinstance(p, Gamma):
            col = rng.gamma(p.shape, 1.0 / p.rate, size=n)
            # an underflowed gamma draw would sit outside the open support
            col = np.maximum(col, np.finfo(float).tiny)
        elif isinstance(p, Normal):
            col = rng.normal(p.mean, math.sqrt(p.var), size=n)
        else:
            col = rng.uniform(p.lo, p.hi, size=n)
        out[:, i] = col
    return out[0] if size is None else out


def prior_scales(spec: ModelSpec) -> np.ndarray:
    """Prior standard deviation of every component."""
    return np.array([p.scale for p in spec.priors])


# ---------------------------------------------------------------- energies

def noise_code(noise) -> tuple[int, np.ndarray, int]:
    """Integer code, parameter vector and literal flag for a noise model."""
    params = np.zeros(4)
    literal = 0
    if isinstance(noise, GaussianFixed):
        code = 0
        params[0] = noise.sigma
    elif isinstance(noise, Poisson):
        code = 1
    elif isinstance(noise, GaussianApproxPoisson):
        code = 2
        literal = int(noise.paper_literal)
    elif isinstance(noise, XpsHetero):
        code = 3
        params[1:] = noise.sigma0, noise.sigma1, noise.sigma2
        literal = int(noise.paper_literal)
    elif isinstance(noise, Flat):
        code = 4
    else:
        raise TypeError(f"unknown noise model {noise!r}")
    return code, params, literal


def pointwise_energy(noise, f: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Per-point negative log-likelihood terms; ``+inf`` where undefined."""
    code, params, literal = noise_code(noise)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if code == 0:
            sigma = params[0]
            var = sigma * sigma
            r = ys - f
            out = 0.5 * math.log(2.0 * math.pi * var) + r * r / (2.0 * var)
        elif code == 1:
            ok = f > 0
            fs = np.where(ok, f, 1.0)
            out = np.where(ok, fs - ys * np.log(fs), np.inf)
        elif code == 2:
            ok = f > 0
            fs = np.where(ok, f, 1.0)
            r = ys - fs
            k = 1.0 if literal else 2.0
            out = np.where(ok, 0.5 * np.log(2.0 * np.pi * fs) + r * r / (k * fs), np.inf)
        elif code == 3:
            s0, s1, s2 = params[1] * params[1], params[2] * params[2], params[3] * params[3]
            var = s0 * f + s1 * f * f + s2
            ok = var > 0
            vs = np.where(ok, var, 1.0)
            r = ys - f
            k = 1.0 if literal else 2.0
            out = np.where(ok, 0.5 * np.log(2.0 * np.pi * vs) + r * r / (k * vs), np.inf)
        else:
            out = np.zeros(np.broadcast(f, ys).shape)
    out = np.where(np.isfinite(f), out, np.inf)
    return np.where(np.isnan(out), np.inf, out)


def energy_batch(spec: ModelSpec, thetas: np.ndarray, data: Spectrum) -> np.ndarray:
    """Per-point energies of ``(M, d)`` parameter vectors (numpy reference path)."""
    f, fault = forward_batch(spec, thetas, data.xs)
    e = pointwise_energy(spec.noise, f, data.ys).sum(axis=1) / data.n
    e[fault] = np.inf
    return e


def energy(spec: ModelSpec, theta, data: Spectrum) -> EnergyValue:
    """Per-point mean negative log-likelihood of ``theta``.

    Evaluated through the active kernel backend so that it agrees bit for
    bit with the energies cached by the samplers.
    """
    from .kernel import batch_evaluate, pack_model

    theta = check_theta(spec, theta)
    e, _ = batch_evaluate(pack_model(spec, data), theta[None, :])
    return EnergyValue(float(e[0]), data.n)


def tempered(e_total, logprior, beta):
    """``-beta * N E + log prior``; at ``beta == 0`` the likelihood is ignored."""
    beta = np.asarray(beta, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        val = np.where(beta == 0, logprior, -beta * np.asarray(e_total) + logprior)
    return val


def log_target(spec: ModelSpec, theta, data: Spectrum, beta: float) -> float:
    """Log density of the tempered posterior, up to its normalising constant."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    lp = prior_logpdf(spec, theta)
    if beta == 0.0:
        return lp
    if lp == -math.inf:
        return -math.inf
    e = energy(spec, theta, data)
    return -beta * e.total + lp
