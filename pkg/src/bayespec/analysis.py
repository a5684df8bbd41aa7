"""Posterior summaries, credible intervals and model selection over K."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import ModelSpec, sort_peaks


def weighted_quantile(samples, weights, q: float) -> float:
    """Linearly interpolated quantile of a weighted sample.

    Sorted sample ``k`` sits at plotting position ``C_{k-1} / C_{N-1}``,
    where ``C`` is the cumulative weight.  With equal weights this is the
    usual ``(k - 1) / (N - 1)`` rule, so ``q = 0.5`` on ``1..100`` gives 50.5.
    Zero-weight samples are ignored.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    if x.shape != w.shape:
        raise ValueError("samples and weights differ in length")
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    keep = w > 0
    if not keep.any():
        raise ValueError("total weight is zero")
    x, w = x[keep], w[keep]
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    if x.size == 1:
        return float(x[0])
    c = np.cumsum(w)
    pos = np.concatenate([[0.0], c[:-1]]) / c[-2]
    return float(np.interp(q, pos, x))


def credible_interval(samples, weights=None, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval."""
    if not 0.0 < level <= 1.0:
        raise ValueError("level must lie in (0, 1]")
    tail = (1.0 - level) / 2.0
    return weighted_quantile(samples, weights, tail), weighted_quantile(samples, weights, 1.0 - tail)


def endpoint_error(interval, reference) -> float:
    """``|lo - lo_ref| + |hi - hi_ref|``."""
    return abs(interval[0] - reference[0]) + abs(interval[1] - reference[1])


def summarize(spec: ModelSpec, samples, levels=(0.95, 0.99)) -> list[dict]:
    """Per-parameter mean, std and credible intervals; peaks relabelled by position."""
    s = sort_peaks(spec, np.atleast_2d(samples))
    rows = []
    for i, name in enumerate(spec.names):
        col = s[:, i]
        row = {"name": name, "mean": float(col.mean()), "std": float(col.std())}
        for lv in levels:
            row[f"ci{round(lv * 100)}"] = list(credible_interval(col, None, lv))
        rows.append(row)
    return rows


@dataclass
class SelectionRow:
    k: int
    free_energy: float
    std: float
    trials: int
    note: str = ""


def model_select(reports) -> tuple[int, list[SelectionRow]]:
    """Pick the peak count with the smallest free energy.

    ``reports`` is a list of ``(K, report)`` pairs; a ``report`` may be a
    ``RunReport``, a plain float, or a list of either (repeated trials,
    averaged).  Non-finite results are excluded and reported in a row with
    a warning note.  Ties go to the smaller K.
    """
    grouped: dict[int, list[float]] = {}
    for k, rep in reports:
        items = rep if isinstance(rep, (list, tuple)) else [rep]
        vals = grouped.setdefault(int(k), [])
        for it in items:
            vals.append(float(getattr(it, "free_energy", it)))
    if not grouped:
        raise ValueError("no candidate models")
    rows, usable = [], []
    for k in sorted(grouped):
        v = np.array(grouped[k])
        bad = ~np.isfinite(v)
        good = v[~bad]
        note = f"warning: {bad.sum()} non-finite run(s) excluded" if bad.any() else ""
        if good.size == 0:
            rows.append(SelectionRow(k, math.nan, math.nan, 0, note))
            continue
        std = float(good.std(ddof=1)) if good.size > 1 else math.nan
        row = SelectionRow(k, float(good.mean()), std, int(good.size), note)
        rows.append(row)
        usable.append(row)
    if not usable:
        raise ValueError("every candidate has a non-finite free energy")
    best = min(usable, key=lambda r: (r.free_energy, r.k))
    return best.k, rows


def format_selection(rows: list[SelectionRow], best: int) -> str:
    lines = ["K\tF\tstd\ttrials\tnote"]
    for r in rows:
        mark = f"selected {r.note}".strip() if r.k == best else r.note
        lines.append(f"{r.k}\t{r.free_energy:.6f}\t{r.std:.6f}\t{r.trials}\t{mark}")
    return "\n".join(lines) + "\n"
