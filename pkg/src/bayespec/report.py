"""Run reports shared by both samplers, with a JSON document format."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np


def _clean(obj):
    """Make numpy values and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _restore(obj):
    if isinstance(obj, dict):
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    return obj


@dataclass
class RunReport:
    """Outcome of one sampler run.

    ``free_energy`` is ``-log Z``.  ``samples`` holds posterior draws at
    ``beta = 1`` (rows are parameter vectors in ``names`` order, equally
    weighted).  ``timings`` are wall-clock seconds from a monotonic clock.
    """

    sampler: str
    free_energy: float
    names: list
    samples: np.ndarray
    ladder: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    acceptance: list = field(default_factory=list)
    swap_rates: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    backend: str = ""

    @property
    def ok(self) -> bool:
        return math.isfinite(self.free_energy)

    def posterior_mean(self) -> dict:
        m = np.asarray(self.samples).mean(axis=0)
        return dict(zip(self.names, map(float, m)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = np.asarray(self.samples)
        return _clean(d)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(indent=1))

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = _restore(dict(d))
        d["samples"] = np.asarray(d["samples"], dtype=np.float64).reshape(-1, len(d["names"]))
        d["free_energy"] = float(d["free_energy"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunReport":
        return cls.from_dict(json.loads(Path(path).read_text()))
