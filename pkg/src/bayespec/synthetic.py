"""Synthetic spectra with known truth, and the default priors for each family.

Truth values live in the ``data`` directory next to this module; nothing
numeric about the truths is written in code.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .models import (
    XRD_BACKGROUND_FIELDS,
    XRD_PHASE_FIELDS,
    AxisKind,
    ForwardModelError,
    Gamma,
    GaussianFixed,
    GaussianMixture,
    ModelSpec,
    Normal,
    PhaseRef,
    Poisson,
    Spectrum,
    Uniform,
    XpsHetero,
    XpsShirley,
    XrdPseudoVoigt,
    forward,
    read_phase_refs,
)
from .rng import derive_key

XRD_SIZES = (1000, 5000, 10000)
XRD_RANGE = (20.0, 60.0)


def data_path(name: str) -> Path:
    return Path(str(resources.files("bayespec") / "data" / name))


def _rows(name: str) -> list[list[str]]:
    out = []
    for raw in data_path(name).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append([p.strip() for p in line.split(",")])
    return out


def _generator(seed: int, *tags) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *tags)))


@dataclass
class TruthTable:
    family: str
    names: list
    theta: list
    n: int
    x_range: tuple
    noise: str

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=1))

    @classmethod
    def load(cls, path) -> "TruthTable":
        d = json.loads(Path(path).read_text())
        d["x_range"] = tuple(d["x_range"])
        return cls(**d)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.theta))


# ---------------------------------------------------------------- Gaussian mixture

def gm_conditions(k: int) -> tuple[int, float, float, float]:
    """``(N, x_lo, x_hi, sigma)`` for the tabulated peak counts."""
    for row in _rows("gm_conditions.csv"):
        if int(row[0]) == k:
            return int(row[1]), float(row[2]), float(row[3]), float(row[4])
    raise ValueError(f"no tabulated Gaussian-mixture conditions for K={k}")


def gm_truth(k: int) -> np.ndarray:
    if k not in (3, 10, 30):
        raise ValueError("tabulated truths exist for K in {3, 10, 30}")
    rows = _rows(f"gm_k{k}.csv")
    return np.array([[float(v) for v in r[1:4]] for r in rows]).ravel()


def gm_spec(k: int, sigma: float = 0.1, x_range: tuple | None = None, centre_prior=None) -> ModelSpec:
    """Gaussian-mixture model with ``k`` peaks and the tabulated priors.

    Centres get ``Normal(1.5, 0.2)`` unless ``x_range`` is given, in which
    case they are uniform over it (the K=10 and K=30 convention).
    """
    if centre_prior is None:
        centre_prior = Normal(1.5, 0.2) if x_range is None else Uniform(*x_range)
    priors = [Gamma(5.0, 5.0), centre_prior, Gamma(5.0, 0.04)] * k
    return ModelSpec(GaussianMixture(k), tuple(priors), GaussianFixed(sigma))


def gen_gaussian_mixture(k: int, seed: int, sigma: float | None = None):
    """Noisy K-peak spectrum on the tabulated grid.

    ``sigma=0`` gives noise-free data; the returned spec then still uses the
    tabulated noise level for its likelihood.
    """
    n, lo, hi, sig_tab = gm_conditions(k)
    spec = gm_spec(k, sig_tab, None if k == 3 else (lo, hi))
    theta = gm_truth(k)
    xs = np.linspace(lo, hi, n)
    f = forward(spec, theta, xs)
    sig = sig_tab if sigma is None else float(sigma)
    ys = f + sig * _generator(seed, "gm", k).standard_normal(n) if sig > 0 else f.copy()
    truth = TruthTable(f"gm{k}", list(spec.names), theta.tolist(), n, (lo, hi),
                       f"gaussian sigma={sig}")
    return Spectrum(xs, ys), spec, truth


# ---------------------------------------------------------------- XRD

def synthetic_phase_refs() -> list[PhaseRef]:
    return read_phase_refs(data_path("tio2_synthetic.ref"))


def xrd_truth(phases: list[PhaseRef]) -> dict:
    table = {r[0]: r[1:] for r in _rows("xrd_phases.csv")}
    cols = ("A", "shift", "alpha", "r", "u", "v", "w", "s", "t")  # file column order
    values = {}
    for ph in phases:
        row = dict(zip(cols, map(float, table[ph.name])))
        for fld in XRD_PHASE_FIELDS:
            values[f"{ph.name}.{fld}"] = row[fld]
    bg = dict(zip(XRD_BACKGROUND_FIELDS, map(float, _rows("xrd_background.csv")[0])))
    for fld in XRD_BACKGROUND_FIELDS:
        values[f"bg.{fld}"] = bg[fld]
    return values


def xrd_spec(phases, ys, noise=None) -> ModelSpec:
    """XRD model with the tabulated priors; hyperparameters come from ``ys``."""
    ymin, ymax = float(np.min(ys)), float(np.max(ys))
    if ymax <= ymin or ymax <= 0:
        raise ValueError("XRD priors need max(y) > min(y) and max(y) > 0")
    phase_priors = {
        "A": Gamma(4.0, 4.0 / (ymax - ymin)),
        "shift": Normal(0.0, 0.05 ** 2),
        "r": Uniform(0.0, 1.0),
        "alpha": Gamma(5.0, 4.0),
        "u": Gamma(1.0, 10.0),
        "v": Gamma(1.0, 10.0),
        "w": Gamma(2.0, 20.0),
        "s": Gamma(2.0, 20.0),
        "t": Gamma(1.0, 10.0),
    }
    root = math.sqrt(max(ymin, 0.0))
    lo_b, hi_b = ymin - root, ymin + root
    if hi_b <= lo_b:
        lo_b, hi_b = ymin - 1.0, ymin + 1.0
    bg_priors = {
        "a": Gamma(2.0, 1.0 / ymax),
        "sigma": Gamma(2.0, 0.4),
        "r": Uniform(0.0, 1.0),
        "b": Uniform(lo_b, hi_b),
    }
    priors = [phase_priors[f] for _ in phases for f in XRD_PHASE_FIELDS]
    priors += [bg_priors[f] for f in XRD_BACKGROUND_FIELDS]
    return ModelSpec(XrdPseudoVoigt(tuple(phases)), tuple(priors), noise or Poisson())


def gen_xrd(n_points: int, seed: int, phases=None, background_only: bool = False,
            noise_free: bool = False):
    """Three-phase powder pattern with Poisson counts on ``[20, 60]`` degrees."""
    if n_points < 2:
        raise ValueError("need at least two points")
    phases = list(phases or synthetic_phase_refs())
    values = xrd_truth(phases)
    if background_only:
        for ph in phases:
            values[f"{ph.name}.A"] = 0.0
    xs = np.linspace(*XRD_RANGE, n_points)
    # priors are data dependent; a placeholder spec fixes the layout first
    layout = xrd_spec(phases, np.array([0.0, 1.0]))
    theta = layout.pack(values)
    f = forward(layout, theta, xs)
    if not np.all(f > 0):
        raise ForwardModelError("XRD mean intensity must be positive everywhere")
    ys = f.copy() if noise_free else _generator(seed, "xrd", n_points).poisson(f).astype(float)
    spec = xrd_spec(phases, ys)
    truth = TruthTable("xrd", list(spec.names), theta.tolist(), n_points, XRD_RANGE, "poisson")
    return Spectrum(xs, ys, AxisKind.TWO_THETA), spec, truth


# ---------------------------------------------------------------- XPS

def xps_spec(k: int, data: Spectrum, noise=None) -> ModelSpec:
    """XPS model with uniform priors whose ranges follow the observed data."""
    ys, xs = data.ys, data.xs
    ymin, ymax = float(ys.min()), float(ys.max())
    peak = [
        Uniform(max(0.0, 0.3 * ymin), 1.05 * ymax),
        Uniform(float(xs[0]), float(xs[-1])),
        Uniform(0.1, 15.0),
        Uniform(0.0, 1.0),
    ]
    first, last = float(ys[0]), float(ys[-1])
    bounds = []
    for y in (first, last):
        lo, hi = sorted((0.95 * y, 1.01 * y))
        bounds.append(Uniform(lo, hi) if hi > lo else Uniform(y - 1.0, y + 1.0))
    return ModelSpec(XpsShirley(k), tuple(peak * k + bounds),
                     noise or XpsHetero(1.0, 0.01, 0.0))


def xps_surrogate_truth(k_true: int) -> tuple[np.ndarray, tuple, int]:
    """Peak table rows, ``(a, b)`` and grid for a ``k_true``-peak surrogate."""
    rows = [[float(v) for v in r[1:5]] for r in _rows("xps_surrogate.csv")]
    a, b, lo, hi, n = map(float, _rows("xps_background.csv")[0])
    if k_true <= len(rows):
        peaks = rows[:k_true]
    else:
        # extra peaks spread over the range beyond the tabulated ones
        extra = np.linspace(lo, hi, k_true - len(rows) + 2)[1:-1]
        peaks = rows + [[800.0, float(m), 1.5, 0.5] for m in extra]
    peaks = sorted(peaks, key=lambda p: p[1])
    return np.array(peaks), (a, b, lo, hi), int(n)


def gen_xps(k_true: int, seed: int, sigmas: tuple = (1.0, 0.01, 0.0), noise_free: bool = False):
    """Pseudo-Voigt peaks on a Shirley background with heteroscedastic noise."""
    if k_true < 1:
        raise ValueError("k_true must be >= 1")
    peaks, (a, b, lo, hi), n = xps_surrogate_truth(k_true)
    xs = np.linspace(lo, hi, n)
    noise = XpsHetero(*sigmas)
    layout = ModelSpec(XpsShirley(k_true), (Uniform(-1e300, 1e300),) * (4 * k_true + 2), noise)
    theta = np.concatenate([peaks.ravel(), [a, b]])
    f = forward(layout, theta, xs)
    s0, s1, s2 = (s * s for s in sigmas)
    var = s0 * f + s1 * f * f + s2
    if noise_free:
        ys = f.copy()
    else:
        ys = f + np.sqrt(var) * _generator(seed, "xps", k_true).standard_normal(n)
    data = Spectrum(xs, ys, AxisKind.BINDING_ENERGY)
    spec = xps_spec(k_true, data, noise)
    truth = TruthTable(f"xps{k_true}", list(spec.names), theta.tolist(), n, (lo, hi),
                       f"xps sigma0={sigmas[0]} sigma1={sigmas[1]} sigma2={sigmas[2]}")
    return data, spec, truth
