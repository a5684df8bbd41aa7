"""Repeated-trial convergence benchmarks.

Each condition (one sampler configuration) is run for several seeds.  The
table reports free-energy mean and spread, wall time, and the mean absolute
deviation ``|dF|`` from a reference value.  Tables are computed from saved
``RunReport`` objects only, so they can be regenerated exactly.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import credible_interval, endpoint_error
from .models import ModelSpec, Spectrum, sort_peaks
from .remc import RemcConfig, remc_run
from .report import RunReport
from .smc import SamplerError, SmcConfig, smc_run


@dataclass
class Condition:
    name: str
    sampler: str  # "smc" or "remc"
    params: dict = field(default_factory=dict)

    @property
    def budget(self) -> int:
        if self.sampler == "smc":
            return int(self.params.get("T", SmcConfig.T))
        return int(self.params.get("total_sweeps", RemcConfig.total_sweeps))


def run_condition(spec: ModelSpec, data: Spectrum, cond: Condition, seed: int,
                  workers: int = 1) -> RunReport:
    """One seeded run; sampler failures come back as a NaN report."""
    params = dict(cond.params, seed=seed, workers=workers)
    try:
        if cond.sampler == "smc":
            return smc_run(spec, data, SmcConfig(**params))
        if cond.sampler == "remc":
            return remc_run(spec, data, RemcConfig(**params))
    except SamplerError as exc:
        return RunReport(cond.sampler, math.nan, list(spec.names), np.empty((0, spec.dim)),
                         flags=[str(exc)], seed=seed, workers=workers)
    raise ValueError(f"unknown sampler {cond.sampler!r}")


def _job(args):
    spec, data, cond, seed, workers = args
    return run_condition(spec, data, cond, seed, workers)


@dataclass
class BenchTable:
    rows: list
    reference: float
    reference_condition: str
    timings_comparable: bool = True

    COLUMNS = ("condition", "sampler", "budget", "trials", "excluded", "F_mean", "F_std",
               "time_mean", "time_std", "dF_mean", "dF_std")

    def to_tsv(self) -> str:
        head = "\t".join(self.COLUMNS)
        lines = [f"# reference F = {self.reference!r} ({self.reference_condition})",
                 f"# timings comparable: {self.timings_comparable}", head]
        for r in self.rows:
            lines.append("\t".join(str(r[c]) for c in self.COLUMNS))
        return "\n".join(lines) + "\n"

    def row(self, name: str) -> dict:
        for r in self.rows:
            if r["condition"] == name:
                return r
        raise KeyError(name)


def _finite(reports):
    good = [r for r in reports if math.isfinite(r.free_energy)]
    return good, len(reports) - len(good)


def pick_reference(conditions, results) -> tuple[str, float]:
    """Mean F of the SMC condition with the largest particle count."""
    smc = [c for c in conditions if c.sampler == "smc"]
    if not smc:
        raise ValueError("automatic reference needs at least one SMC condition")
    best = max(smc, key=lambda c: c.budget)
    good, _ = _finite(results[best.name])
    if not good:
        raise ValueError(f"reference condition {best.name!r} has no finite runs")
    return best.name, float(np.mean([r.free_energy for r in good]))


def tabulate(conditions, results: dict, reference="auto",
             timings_comparable: bool = True) -> BenchTable:
    """Build the benchmark table from per-condition lists of reports."""
    if reference == "auto":
        ref_name, ref = pick_reference(conditions, results)
    elif isinstance(reference, RunReport):
        ref_name, ref = "given report", float(reference.free_energy)
    else:
        ref_name, ref = "given value", float(reference)
    rows = []
    for c in conditions:
        reps = results[c.name]
        good, excluded = _finite(reps)
        f = np.array([r.free_energy for r in good])
        t = np.array([r.timings.get("sampling", math.nan) for r in good])
        df = np.abs(f - ref)
        ddof = 1 if len(good) > 1 else 0
        rows.append({
            "condition": c.name, "sampler": c.sampler, "budget": c.budget,
            "trials": len(reps), "excluded": excluded,
            "F_mean": float(f.mean()) if f.size else math.nan,
            "F_std": float(f.std(ddof=ddof)) if f.size else math.nan,
            "time_mean": float(t.mean()) if t.size else math.nan,
            "time_std": float(t.std(ddof=ddof)) if t.size else math.nan,
            "dF_mean": float(df.mean()) if df.size else math.nan,
            "dF_std": float(df.std(ddof=ddof)) if df.size else math.nan,
        })
    return BenchTable(rows, ref, ref_name, timings_comparable)


def benchmark(spec: ModelSpec, data: Spectrum, conditions, trials: int, reference="auto",
              seed: int = 0, workers: int = 1, parallel_trials: bool = False,
              save_dir=None) -> tuple[BenchTable, dict]:
    """Run every condition ``trials`` times (seeds ``seed .. seed + trials - 1``)."""
    if trials < 2:
        raise ValueError("a benchmark needs at least two trials")
    names = [c.name for c in conditions]
    if len(set(names)) != len(names):
        raise ValueError("condition names must be unique")
    if reference == "auto" and not any(c.sampler == "smc" for c in conditions):
        raise ValueError("automatic reference needs at least one SMC condition")
    results = {}
    for c in conditions:
        jobs = [(spec, data, c, seed + i, workers) for i in range(trials)]
        if parallel_trials:
            with ProcessPoolExecutor() as pool:
                results[c.name] = list(pool.map(_job, jobs))
        else:
            results[c.name] = [_job(j) for j in jobs]
        if save_dir is not None:
            out = Path(save_dir)
            out.mkdir(parents=True, exist_ok=True)
            for i, rep in enumerate(results[c.name]):
                rep.save(out / f"{c.name}_trial{i:03d}.json")
    table = tabulate(conditions, results, reference, timings_comparable=not parallel_trials)
    return table, results


def load_results(save_dir, conditions) -> dict:
    """Reports written by :func:`benchmark`, grouped by condition."""
    out = Path(save_dir)
    return {c.name: [RunReport.load(p) for p in sorted(out.glob(f"{c.name}_trial*.json"))]
            for c in conditions}


def interpolate_time(times, errors, target: float) -> float:
    """Time at which a decreasing error curve reaches ``target`` (log-log linear).

    Returns NaN when ``target`` is outside the range spanned by the curve.
    """
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    ok = (t > 0) & (e > 0) & np.isfinite(t) & np.isfinite(e)
    t, e = t[ok], e[ok]
    order = np.argsort(t)
    lt, le = np.log(t[order]), np.log(e[order])
    lg = math.log(target)
    for i in range(len(lt) - 1):
        a, b = le[i], le[i + 1]
        if (a - lg) * (b - lg) <= 0 and a != b:
            frac = (lg - a) / (b - a)
            return float(math.exp(lt[i] + frac * (lt[i + 1] - lt[i])))
        if a == b == lg:
            return float(math.exp(lt[i]))
    return math.nan


def speedup(table: BenchTable) -> float:
    """Time of the largest REMC condition over the SMC time reaching the same ``|dF|``."""
    remc = [r for r in table.rows if r["sampler"] == "remc"]
    smc = [r for r in table.rows if r["sampler"] == "smc" and r["condition"] != table.reference_condition]
    if not remc or not smc:
        return math.nan
    big = max(remc, key=lambda r: r["budget"])
    t = interpolate_time([r["time_mean"] for r in smc], [r["dF_mean"] for r in smc], big["dF_mean"])
    return big["time_mean"] / t if math.isfinite(t) and t > 0 else math.nan


def _param_group(spec: ModelSpec, param: str) -> list[int]:
    if param in spec.names:
        return [spec.index(param)]
    idx = [i for i, n in enumerate(spec.names) if n.split("_")[0] == param and "_" in n]
    if not idx:
        raise KeyError(f"unknown parameter {param!r}")
    return idx


def reference_intervals(spec: ModelSpec, reports, level: float = 0.95) -> dict:
    """Credible intervals from the pooled samples of reference reports."""
    pooled = sort_peaks(spec, np.concatenate([np.atleast_2d(r.samples) for r in reports]))
    return {n: credible_interval(pooled[:, i], None, level) for i, n in enumerate(spec.names)}


def ci_error_curve(spec: ModelSpec, results: dict, truth_ref: dict, param: str,
                   level: float = 0.95, conditions=None) -> list[dict]:
    """Mean endpoint error of the ``param`` interval per condition.

    ``param`` is either a full parameter name or a family prefix such as
    ``mu``, in which case the error is averaged over all peaks.
    """
    idx = _param_group(spec, param)
    names = [c.name for c in conditions] if conditions else list(results)
    rows = []
    for name in names:
        errs, times = [], []
        for rep in results[name]:
            if not math.isfinite(rep.free_energy) or len(rep.samples) == 0:
                continue
            s = sort_peaks(spec, np.atleast_2d(rep.samples))
            per = [endpoint_error(credible_interval(s[:, i], None, level), truth_ref[spec.names[i]])
                   for i in idx]
            errs.append(float(np.mean(per)))
            times.append(rep.timings.get("sampling", math.nan))
        errs, times = np.array(errs), np.array(times)
        ddof = 1 if len(errs) > 1 else 0
        rows.append({
            "condition": name,
            "time_mean": float(times.mean()) if times.size else math.nan,
            "time_std": float(times.std(ddof=ddof)) if times.size else math.nan,
            "err_mean": float(errs.mean()) if errs.size else math.nan,
            "err_std": float(errs.std(ddof=ddof)) if errs.size else math.nan,
        })
    return rows
