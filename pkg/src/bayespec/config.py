"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Recognised keys::

    family            gm | xrd | xps | polynomial
    K                 peak count (gm, xps)
    degree            polynomial degree (polynomial, default 0)
    phase_ref         reflection list file (xrd; default: bundled synthetic set)
    gm.centres        normal | uniform   (gm centre prior, default normal)
    noise             gaussian | poisson | gauss_approx | xps_hetero | flat
    noise.sigma       gaussian noise level (default 0.1)
    noise.sigma0/1/2  xps_hetero scales (default 1.0, 0.01, 0.0)
    xps_energy_paper_literal   true | false (drop the 1/2 on the quadratic term)
    prior.<name>      override, e.g. ``prior.mu_1 = normal(1.2, 0.01)``
    smc.T smc.n smc.ess_target smc.max_levels
    remc.L remc.sweeps remc.burn_in remc.swap_period remc.beta_min remc.swaps
    bench.smc.T bench.remc.sweeps   comma-separated grids
    seed workers
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .models import (
    Flat,
    GaussianApproxPoisson,
    GaussianFixed,
    ModelSpec,
    Normal,
    Poisson,
    Polynomial,
    Spectrum,
    Uniform,
    XpsHetero,
    parse_prior,
    read_phase_refs,
)
from .remc import RemcConfig
from .smc import SmcConfig
from .synthetic import gm_spec, synthetic_phase_refs, xps_spec, xrd_spec


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


KNOWN = {
    "family", "K", "degree", "phase_ref", "gm.centres", "noise", "noise.sigma", "noise.sigma0",
    "noise.sigma1", "noise.sigma2", "xps_energy_paper_literal",
    "smc.T", "smc.n", "smc.ess_target", "smc.max_levels",
    "remc.L", "remc.sweeps", "remc.burn_in", "remc.swap_period", "remc.beta_min", "remc.swaps",
    "bench.smc.T", "bench.remc.sweeps", "seed", "workers",
}
FAMILIES = ("gm", "xrd", "xps", "polynomial")
NOISES = ("gaussian", "poisson", "gauss_approx", "xps_hetero", "flat")
DEFAULT_NOISE = {"gm": "gaussian", "xrd": "poisson", "xps": "xps_hetero", "polynomial": "gaussian"}


@dataclass
class RunConfig:
    values: dict
    text: str = ""
    priors: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    # ---- typed access
    def get(self, key, cast=str, default=None):
        if key not in self.values:
            return default
        raw = self.values[key]
        try:
            if cast is bool:
                if raw.lower() in ("1", "true", "yes", "on"):
                    return True
                if raw.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return cast(raw)
        except ValueError:
            raise ConfigError(f"{key}: cannot interpret {raw!r} as {cast.__name__}") from None

    def require(self, key, cast=str):
        if key not in self.values:
            raise ConfigError(f"{key}: required key missing")
        return self.get(key, cast)

    def int_list(self, key) -> list[int]:
        if key not in self.values:
            return []
        try:
            return [int(float(v)) for v in self.values[key].split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"{key}: expected a comma-separated list of integers") from None

    @property
    def family(self) -> str:
        fam = self.require("family")
        if fam not in FAMILIES:
            raise ConfigError(f"family: expected one of {FAMILIES}, got {fam!r}")
        return fam

    @property
    def seed(self) -> int:
        return self.get("seed", int, 0)

    @property
    def workers(self) -> int:
        w = self.get("workers", int, 1)
        if w < 1:
            raise ConfigError("workers: must be >= 1")
        return w

    # ---- model
    def noise(self):
        kind = self.get("noise", str, DEFAULT_NOISE[self.family])
        literal = self.get("xps_energy_paper_literal", bool, False)
        try:
            if kind == "gaussian":
                return GaussianFixed(self.get("noise.sigma", float, 0.1))
            if kind == "poisson":
                return Poisson()
            if kind == "gauss_approx":
                return GaussianApproxPoisson(literal)
            if kind == "xps_hetero":
                return XpsHetero(self.get("noise.sigma0", float, 1.0),
                                 self.get("noise.sigma1", float, 0.01),
                                 self.get("noise.sigma2", float, 0.0), literal)
            if kind == "flat":
                return Flat()
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from None
        raise ConfigError(f"noise: expected one of {NOISES}, got {kind!r}")

    def model_spec(self, data: Spectrum, k: int | None = None) -> ModelSpec:
        fam = self.family
        noise = self.noise()
        if fam in ("gm", "xps"):
            if k is None:
                k = self.require("K", int)
            if k < 1:
                raise ConfigError("K: must be >= 1")
        if fam == "gm":
            centres = self.get("gm.centres", str, "normal")
            if centres not in ("normal", "uniform"):
                raise ConfigError("gm.centres: expected normal or uniform")
            centre = None if centres == "normal" else Uniform(float(data.xs[0]), float(data.xs[-1]))
            spec = gm_spec(k, centre_prior=centre)
            spec = ModelSpec(spec.family, spec.priors, noise)
        elif fam == "xps":
            spec = xps_spec(k, data, noise)
        elif fam == "xrd":
            ref = self.get("phase_ref")
            phases = read_phase_refs(self.base_dir / ref) if ref else synthetic_phase_refs()
            spec = xrd_spec(phases, data.ys, noise)
        else:
            deg = self.get("degree", int, 0)
            if deg < 0:
                raise ConfigError("degree: must be >= 0")
            spec = ModelSpec(Polynomial(deg), (Normal(0.0, 1.0),) * (deg + 1), noise)
        if self.priors:
            unknown = [n for n in self.priors if n not in spec.names]
            if unknown:
                raise ConfigError(f"prior.{unknown[0]}: no such parameter in this model")
            spec = spec.with_priors(self.priors)
        return spec

    # ---- samplers
    def smc(self, T: int | None = None) -> SmcConfig:
        try:
            return SmcConfig(
                T=T if T is not None else self.get("smc.T", int, 10_000),
                n=self.get("smc.n", int, 10),
                ess_target=self.get("smc.ess_target", float, 0.5),
                max_levels=self.get("smc.max_levels", int, 1000),
                seed=self.seed, workers=self.workers)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"smc.T/smc.n: {exc}") from None

    def remc(self, sweeps: int | None = None) -> RemcConfig:
        try:
            return RemcConfig(
                L=self.get("remc.L", int, 44),
                total_sweeps=sweeps if sweeps is not None else self.get("remc.sweeps", int, 10_000),
                burn_in_fraction=self.get("remc.burn_in", float, 0.5),
                swap_period=self.get("remc.swap_period", int, 1),
                beta_min=self.get("remc.beta_min", float, 1e-5),
                swaps=self.get("remc.swaps", bool, True),
                seed=self.seed, workers=self.workers)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"remc: {exc}") from None

    def validate(self) -> "RunConfig":
        """Check everything that can be checked without data."""
        self.family
        self.noise()
        self.workers
        if "smc.T" in self.values or "smc.n" in self.values:
            self.smc()
        for t in self.int_list("bench.smc.T"):
            self.smc(T=t)
        self.remc()
        return self


def parse_config(text: str, base_dir=".") -> RunConfig:
    values, priors = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key.startswith("prior."):
            try:
                priors[key[6:]] = parse_prior(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            continue
        if key not in KNOWN:
            raise ConfigError(f"{key}: unknown key")
        if key in values:
            raise ConfigError(f"{key}: given twice")
        values[key] = value
    return RunConfig(values, text, priors, Path(base_dir)).validate()


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, p.parent)
