"""Forward models, parameter layouts and spectrum containers.

Three peak-model families are supported, plus a polynomial baseline family
that is mainly useful as an analytically tractable test problem:

* ``GaussianMixture(k)``  -- sum of ``k`` Gaussian peaks, layout ``(A, mu, b)`` per peak.
* ``XrdPseudoVoigt(phases)`` -- powder-diffraction reference-pattern model with
  Caglioti widths, asymmetry and a pseudo-Voigt background.
* ``XpsShirley(k)`` -- pseudo-Voigt photoemission peaks on a dynamic Shirley
  background.
* ``Polynomial(degree)`` -- ``f(x) = sum_j c_j x**j``.

Every forward model is written as a sum of independent *blocks* (one per peak
or phase, plus background).  The samplers exploit this: a component-wise
update only re-evaluates the block that owns the component.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

FOUR_LN2 = 4.0 * math.log(2.0)
LN2 = math.log(2.0)

XRD_PHASE_FIELDS = ("A", "shift", "r", "alpha", "u", "v", "w", "s", "t")
XRD_BACKGROUND_FIELDS = ("a", "sigma", "r", "b")


class ForwardModelError(ValueError):
    """Raised when a forward model cannot be evaluated at the given parameters."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class AxisKind(enum.Enum):
    GENERIC = "generic"
    TWO_THETA = "two_theta"
    BINDING_ENERGY = "binding_energy"


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Observed ``(x, y)`` pairs."""

    xs: np.ndarray
    ys: np.ndarray
    axis_kind: AxisKind = AxisKind.GENERIC

    def __post_init__(self):
        xs = np.ascontiguousarray(self.xs, dtype=np.float64)
        ys = np.ascontiguousarray(self.ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ValueError("xs and ys must be 1-d arrays of equal length")
        if len(xs) < 2:
            raise ValueError("a spectrum needs at least two points")
        if not np.all(np.isfinite(xs)) or not np.all(np.isfinite(ys)):
            raise ValueError("spectrum contains non-finite values")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self):
        return len(self.xs)

    @property
    def n(self) -> int:
        return len(self.xs)


def read_spectrum(path, axis_kind: AxisKind = AxisKind.GENERIC) -> Spectrum:
    """Read a two-column text file (comma or whitespace separated).

    Lines starting with ``#`` are comments; a single non-numeric header line
    is skipped.
    """
    xs, ys = [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            try:
                x, y = float(parts[0]), float(parts[1])
            except (ValueError, IndexError):
                if not xs:
                    continue  # header
                raise ValueError(f"{path}:{lineno}: cannot parse {raw.strip()!r}")
            xs.append(x)
            ys.append(y)
    return Spectrum(np.array(xs), np.array(ys), axis_kind)


def write_spectrum(path, spectrum: Spectrum, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for x, y in zip(spectrum.xs, spectrum.ys):
            fh.write(f"{float(x)!r}, {float(y)!r}\n")


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class PhaseRef:
    """Reference reflections of one crystalline phase."""

    name: str
    positions: tuple  # degrees 2-theta
    intensities: tuple  # relative, >= 0

    def __post_init__(self):
        if len(self.positions) == 0:
            raise ValueError(f"phase {self.name!r} has no reflections")
        if len(self.positions) != len(self.intensities):
            raise ValueError(f"phase {self.name!r}: positions/intensities length mismatch")
        if any(i < 0 for i in self.intensities) or sum(self.intensities) <= 0:
            raise ValueError(f"phase {self.name!r}: intensities must be >= 0 with positive sum")

    def outside(self, lo: float, hi: float) -> list:
        """Reference positions falling outside the scan range ``[lo, hi]``."""
        return [p for p in self.positions if not lo <= p <= hi]


def read_phase_refs(path) -> list[PhaseRef]:
    """Parse ``phase_name, mu_ref_deg, rel_intensity`` lines, keeping file order."""
    table: dict[str, list] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'name, position, intensity'")
            name, pos, inten = parts[0], float(parts[1]), float(parts[2])
            table.setdefault(name, []).append((pos, inten))
    return [
        PhaseRef(name, tuple(p for p, _ in refl), tuple(i for _, i in refl))
        for name, refl in table.items()
    ]


@dataclass(frozen=True)
class GaussianMixture:
    k: int


@dataclass(frozen=True)
class XrdPseudoVoigt:
    phases: tuple

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValueError("XRD model needs at least one phase")


@dataclass(frozen=True)
class XpsShirley:
    k: int


@dataclass(frozen=True)
class Polynomial:
    degree: int = 0


Family = Union[GaussianMixture, XrdPseudoVoigt, XpsShirley, Polynomial]


def layout_names(family: Family) -> tuple:
    if isinstance(family, GaussianMixture):
        return tuple(f"{p}_{k + 1}" for k in range(family.k) for p in ("A", "mu", "b"))
    if isinstance(family, XpsShirley):
        names = [f"{p}_{k + 1}" for k in range(family.k) for p in ("A", "mu", "sigma", "eta")]
        return tuple(names + ["a", "b"])
    if isinstance(family, XrdPseudoVoigt):
        names = [f"{ph.name}.{p}" for ph in family.phases for p in XRD_PHASE_FIELDS]
        return tuple(names + [f"bg.{p}" for p in XRD_BACKGROUND_FIELDS])
    if isinstance(family, Polynomial):
        return tuple(f"c_{j}" for j in range(family.degree + 1))
    raise TypeError(f"unknown model family {family!r}")


def block_layout(family: Family) -> tuple[int, np.ndarray]:
    """Number of additive blocks and the block owning each component.

    Components owned by block ``-1`` do not enter any additive block (the
    Shirley endpoints of the XPS model).
    """
    if isinstance(family, GaussianMixture):
        return family.k, np.repeat(np.arange(family.k), 3)
    if isinstance(family, XpsShirley):
        return family.k, np.concatenate([np.repeat(np.arange(family.k), 4), [-1, -1]])
    if isinstance(family, XrdPseudoVoigt):
        p = len(family.phases)
        return p + 1, np.concatenate([np.repeat(np.arange(p), 9), np.full(4, p)])
    if isinstance(family, Polynomial):
        return 1, np.zeros(family.degree + 1, dtype=np.int64)
    raise TypeError(f"unknown model family {family!r}")


# ---------------------------------------------------------------- noise

@dataclass(frozen=True)
class GaussianFixed:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class Poisson:
    pass


@dataclass(frozen=True)
class GaussianApproxPoisson:
    paper_literal: bool = False


@dataclass(frozen=True)
class XpsHetero:
    sigma0: float = 1.0
    sigma1: float = 0.01
    sigma2: float = 0.0
    paper_literal: bool = False

    def __post_init__(self):
        s = (self.sigma0, self.sigma1, self.sigma2)
        if min(s) < 0 or max(s) == 0:
            raise ValueError("noise scales must be >= 0 and not all zero")


@dataclass(frozen=True)
class Flat:
    """Constant likelihood (energy identically zero); samples the prior."""


NoiseSpec = Union[GaussianFixed, Poisson, GaussianApproxPoisson, XpsHetero, Flat]


# ---------------------------------------------------------------- priors

@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("gamma shape and rate must be positive")

    @property
    def scale(self):
        return math.sqrt(self.shape) / self.rate


@dataclass(frozen=True)
class Normal:
    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("normal variance must be positive")

    @property
    def scale(self):
        return math.sqrt(self.var)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform bounds must satisfy lo < hi")

    @property
    def scale(self):
        return (self.hi - self.lo) / math.sqrt(12.0)


Prior = Union[Gamma, Normal, Uniform]


def parse_prior(text: str) -> Prior:
    """Parse ``gamma(a, b)``, ``normal(m, var)`` or ``uniform(lo, hi)``."""
    s = text.strip().lower().replace(" ", "")
    for name, cls in (("gamma", Gamma), ("normal", Normal), ("uniform", Uniform)):
        if s.startswith(name + "(") and s.endswith(")"):
            args = s[len(name) + 1:-1].split(",")
            if len(args) != 2:
                break
            return cls(float(args[0]), float(args[1]))
    raise ValueError(f"cannot parse prior {text!r}")


def format_prior(p: Prior) -> str:
    if isinstance(p, Gamma):
        return f"gamma({p.shape!r}, {p.rate!r})"
    if isinstance(p, Normal):
        return f"normal({p.mean!r}, {p.var!r})"
    return f"uniform({p.lo!r}, {p.hi!r})"


# ---------------------------------------------------------------- spec

@dataclass(frozen=True)
class ModelSpec:
    family: Family
    priors: tuple
    noise: NoiseSpec
    names: tuple = field(default=())

    def __post_init__(self):
        names = layout_names(self.family)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "priors", tuple(self.priors))
        if len(self.priors) != len(names):
            raise ValueError(
                f"{type(self.family).__name__} needs {len(names)} priors, got {len(self.priors)}"
            )
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        if isinstance(self.family, (GaussianMixture, XpsShirley)) and self.family.k < 0:
            raise ValueError("peak count must be non-negative")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}") from None

    def with_priors(self, overrides: dict) -> "ModelSpec":
        priors = list(self.priors)
        for name, prior in overrides.items():
            priors[self.index(name)] = prior
        return ModelSpec(self.family, tuple(priors), self.noise)

    def pack(self, values: dict) -> np.ndarray:
        return np.array([values[n] for n in self.names], dtype=np.float64)

    def unpack(self, theta) -> dict:
        theta = check_theta(self, theta)
        return {n: float(v) for n, v in zip(self.names, theta)}


def check_theta(spec: ModelSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.dim,):
        raise ValueError(f"expected parameter vector of length {spec.dim}, got shape {theta.shape}")
    return theta


# ---------------------------------------------------------------- lineshapes

def pseudo_voigt(x, rho, gamma_g, gamma_l, r):
    """Height-normalised pseudo-Voigt ``(1-r) G + r L`` with FWHM widths."""
    gamma_g = np.asarray(gamma_g, dtype=np.float64)
    gamma_l = np.asarray(gamma_l, dtype=np.float64)
    if np.any(gamma_g <= 0) or np.any(gamma_l <= 0):
        raise ValueError("pseudo-Voigt widths must be positive")
    d = np.asarray(x, dtype=np.float64) - rho
    g = np.exp(-FOUR_LN2 * (d / gamma_g) ** 2)
    lor = 1.0 / (1.0 + 4.0 * (d / gamma_l) ** 2)
    out = (1.0 - r) * g + r * lor
    return float(out) if np.ndim(out) == 0 else out


def shirley_background(xs, peak_signal, a: float, b: float) -> np.ndarray:
    """Shirley background pinned to ``a`` at ``xs[0]`` and ``b`` at ``xs[-1]``.

    Proportional to the running trapezoidal integral of ``peak_signal``.  A
    (numerically) vanishing signal gives a straight line from a to b.
    """
    xs = np.asarray(xs, dtype=np.float64)
    sig = np.asarray(peak_signal, dtype=np.float64)
    if xs.shape != sig.shape or xs.ndim != 1:
        raise ValueError("xs and peak_signal must be 1-d arrays of equal length")
    if np.any(sig < 0):
        raise ValueError("peak_signal must be non-negative")
    return shirley_batch(xs, sig[None, :], np.array([a], float), np.array([b], float))[0]


def shirley_batch(xs, peaks, a, b):
    """Row-wise Shirley background for a ``(M, N)`` peak-signal array."""
    m, n = peaks.shape
    out = np.empty((m, n))
    cum = np.zeros((m, n))
    np.cumsum(0.5 * (peaks[:, 1:] + peaks[:, :-1]) * np.diff(xs), axis=1, out=cum[:, 1:])
    total = cum[:, -1]
    thresh = 1e-12 * np.max(peaks, axis=1) * (xs[-1] - xs[0])
    degenerate = total <= thresh
    with np.errstate(invalid="ignore", divide="ignore"):
        w = cum / total[:, None]
    if np.any(degenerate):
        w[degenerate] = (xs - xs[0]) / (xs[-1] - xs[0])
    a = np.asarray(a, dtype=np.float64)[:, None]
    b = np.asarray(b, dtype=np.float64)[:, None]
    out = a + (b - a) * w
    np.clip(out, np.minimum(a, b), np.maximum(a, b), out=out)
    out[:, 0] = a[:, 0]
    out[:, -1] = b[:, 0]
    return out


# ---------------------------------------------------------------- block evaluation

def xrd_trig(xs):
    """``tan(x/2)`` and ``sec(x/2)`` for x in degrees."""
    half = np.deg2rad(np.asarray(xs, dtype=np.float64)) / 2.0
    return np.tan(half), 1.0 / np.cos(half)


def block_contribution(family: Family, thetas: np.ndarray, block: int, xs: np.ndarray,
                       trig=None):
    """Contribution of one additive block for a batch of parameter vectors.

    Returns ``(values, fault)`` where ``values`` has shape ``(M, N)`` and
    ``fault`` flags rows for which the model is undefined (non-positive
    Caglioti discriminant).
    """
    thetas = np.atleast_2d(thetas)
    m = thetas.shape[0]
    fault = np.zeros(m, dtype=bool)
    if isinstance(family, GaussianMixture):
        amp, mu, bw = (thetas[:, 3 * block + j, None] for j in range(3))
        d = xs - mu
        return amp * np.exp(-0.5 * bw * (d * d)), fault
    if isinstance(family, XpsShirley):
        amp, mu, sig, eta = (thetas[:, 4 * block + j, None] for j in range(4))
        d2 = (xs - mu) ** 2
        s2 = sig * sig
        g = np.exp(-LN2 * d2 / s2)
        lor = s2 / (s2 + d2)
        return amp * (eta * g + (1.0 - eta) * lor), fault
    if isinstance(family, Polynomial):
        out = np.repeat(thetas[:, -1, None], len(xs), axis=1)
        for j in range(family.degree - 1, -1, -1):
            out = out * xs + thetas[:, j, None]
        return out, fault
    if isinstance(family, XrdPseudoVoigt):
        nph = len(family.phases)
        if block == nph:
            a, sbg, rbg, off = (thetas[:, 9 * nph + j, None] for j in range(4))
            z = xs / sbg
            v = (1.0 - rbg) * np.exp(-FOUR_LN2 * z * z) + rbg / (1.0 + 4.0 * z * z)
            return a * v + off, fault
        tan_h, sec_h = trig if trig is not None else xrd_trig(xs)
        p = thetas[:, 9 * block:9 * block + 9]
        amp, shift, r, alpha, u, v, w, s, t = (p[:, j, None] for j in range(9))
        disc = u * tan_h * tan_h - v * tan_h + w
        fault = np.any(disc <= 0, axis=1) | np.any(~np.isfinite(disc), axis=1)
        with np.errstate(invalid="ignore"):
            sig_base = np.sqrt(disc)
        om_base = s * sec_h + t * tan_h
        phase = family.phases[block]
        out = np.zeros((m, len(xs)))
        for pos, rel in zip(phase.positions, phase.intensities):
            c = pos + shift
            asym = np.where(xs >= c, alpha, 1.0)
            d = xs - c
            zg = d / (asym * sig_base)
            zl = d / (asym * om_base)
            out += rel * ((1.0 - r) * np.exp(-FOUR_LN2 * zg * zg) + r / (1.0 + 4.0 * zl * zl))
        return amp * out, fault
    raise TypeError(f"unknown model family {family!r}")


def forward_batch(spec: ModelSpec, thetas: np.ndarray, xs: np.ndarray):
    """Evaluate the forward model for ``(M, d)`` parameters; returns ``(f, fault)``."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    xs = np.asarray(xs, dtype=np.float64)
    fam = spec.family
    nblocks, _ = block_layout(fam)
    trig = xrd_trig(xs) if isinstance(fam, XrdPseudoVoigt) else None
    f = np.zeros((thetas.shape[0], len(xs)))
    fault = np.zeros(thetas.shape[0], dtype=bool)
    for b in range(nblocks):
        c, bad = block_contribution(fam, thetas, b, xs, trig)
        f += c
        fault |= bad
    if isinstance(fam, XpsShirley):
        with np.errstate(invalid="ignore"):
            f = f + shirley_batch(xs, f, thetas[:, -2], thetas[:, -1])
    return f, fault


def _forward_single(spec, theta, xs, family_type):
    if not isinstance(spec.family, family_type):
        raise TypeError(f"expected a {family_type.__name__} model, got {type(spec.family).__name__}")
    theta = check_theta(spec, theta)
    xs = np.asarray(xs, dtype=np.float64)
    f, fault = forward_batch(spec, theta[None, :], xs)
    if fault[0]:
        raise _caglioti_error(spec, theta, xs)
    return f[0]


def _caglioti_error(spec, theta, xs):
    tan_h, _ = xrd_trig(xs)
    for k, ph in enumerate(spec.family.phases):
        u, v, w = theta[9 * k + 4:9 * k + 7]
        disc = u * tan_h ** 2 - v * tan_h + w
        bad = np.flatnonzero(~(disc > 0))
        if bad.size:
            x = float(xs[bad[0]])
            return ForwardModelError(
                f"non-positive Caglioti discriminant for phase {ph.name!r} at x={x}", x=x)
    return ForwardModelError("forward model fault")


def gaussian_mixture_forward(spec: ModelSpec, theta, xs) -> np.ndarray:
    return _forward_single(spec, theta, xs, GaussianMixture)


def xrd_forward(spec: ModelSpec, theta, xs) -> np.ndarray:
    return _forward_single(spec, theta, xs, XrdPseudoVoigt)


def xps_forward(spec: ModelSpec, theta, xs) -> np.ndarray:
    return _forward_single(spec, theta, xs, XpsShirley)


def polynomial_forward(spec: ModelSpec, theta, xs) -> np.ndarray:
    return _forward_single(spec, theta, xs, Polynomial)


def forward(spec: ModelSpec, theta, xs) -> np.ndarray:
    """Dispatch to the forward model of ``spec.family``."""
    return _forward_single(spec, theta, xs, type(spec.family))


def xps_peaks(spec: ModelSpec, theta, xs) -> np.ndarray:
    """Bare peak sum of the XPS model (no background)."""
    theta = check_theta(spec, theta)
    f = np.zeros(len(xs))
    for b in range(spec.family.k):
        f += block_contribution(spec.family, theta[None, :], b, np.asarray(xs, float))[0][0]
    return f


def sort_peaks(spec: ModelSpec, samples: np.ndarray) -> np.ndarray:
    """Relabel peaks inside every sample so that centres increase.

    Applies to the Gaussian-mixture and XPS families; other families are
    returned unchanged.
    """
    samples = np.array(samples, dtype=np.float64, copy=True)
    fam = spec.family
    if isinstance(fam, GaussianMixture):
        width, k, pos = 3, fam.k, 1
    elif isinstance(fam, XpsShirley):
        width, k, pos = 4, fam.k, 1
    else:
        return samples
    if k < 2:
        return samples
    peaks = samples[:, :width * k].reshape(len(samples), k, width)
    order = np.argsort(peaks[:, :, pos], axis=1, kind="stable")
    peaks = np.take_along_axis(peaks, order[:, :, None], axis=1)
    samples[:, :width * k] = peaks.reshape(len(samples), width * k)
    return samples
