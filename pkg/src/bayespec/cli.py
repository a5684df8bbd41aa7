"""Command-line interface.

Exit status: 0 on success, 2 for configuration or usage errors, 3 when a
sampler produces a non-finite free energy or cannot finish.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import analysis, bench
from .config import ConfigError, RunConfig, load_config
from .models import AxisKind, read_spectrum, write_spectrum
from .remc import remc_run
from .smc import SamplerError, smc_run
from .synthetic import XRD_SIZES, gen_gaussian_mixture, gen_xps, gen_xrd

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
AXES = {"gm": AxisKind.GENERIC, "polynomial": AxisKind.GENERIC,
        "xrd": AxisKind.TWO_THETA, "xps": AxisKind.BINDING_ENERGY}


class NumericFailure(RuntimeError):
    pass


def _load_data(cfg: RunConfig, path):
    try:
        return read_spectrum(path, AXES[cfg.family])
    except (OSError, ValueError) as exc:
        raise ConfigError(f"data: {exc}") from None


def fit_once(cfg: RunConfig, data, sampler: str, k=None):
    spec = cfg.model_spec(data, k)
    if sampler == "smc":
        rep = smc_run(spec, data, cfg.smc())
    else:
        rep = remc_run(spec, data, cfg.remc())
    rep.config = dict(rep.config, config_text=cfg.text, family=cfg.family,
                      K=k if k is not None else cfg.values.get("K"))
    if len(rep.samples):
        rep.summary = analysis.summarize(spec, rep.samples)
    return rep


def cmd_generate(args) -> int:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: {exc}") from None
    fam = args.family
    if fam.startswith("gm"):
        data, _, truth = gen_gaussian_mixture(int(fam[2:]), args.seed)
    elif fam == "xrd":
        n = args.n or XRD_SIZES[0]
        data, _, truth = gen_xrd(n, args.seed)
    else:
        data, _, truth = gen_xps(args.k_true, args.seed)
    write_spectrum(out / "spectrum.csv", data)
    truth.save(out / "truth.json")
    print(f"wrote {data.n} points to {out / 'spectrum.csv'}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    data = _load_data(cfg, args.data)
    try:
        rep = fit_once(cfg, data, args.sampler)
    except SamplerError as exc:
        raise NumericFailure(str(exc)) from None
    rep.save(args.out)
    print(f"F = {rep.free_energy!r}")
    if not rep.ok:
        raise NumericFailure("non-finite free energy")
    return EXIT_OK


def _k_range(text: str) -> list[int]:
    try:
        lo, _, hi = text.partition("..")
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise ConfigError(f"--k-range: expected LO..HI, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise ConfigError("--k-range: need 1 <= LO <= HI")
    return list(range(lo, hi + 1))


def cmd_model_select(args) -> int:
    cfg = load_config(args.config)
    ks = _k_range(args.k_range)
    data = _load_data(cfg, args.data)
    results = []
    for k in ks:
        for t in range(args.trials):
            tcfg = RunConfig(dict(cfg.values, seed=str(cfg.seed + t)), cfg.text, cfg.priors,
                             cfg.base_dir)
            try:
                rep = fit_once(tcfg, data, args.sampler, k)
            except SamplerError:
                rep = math.nan
            results.append((k, rep))
    try:
        best, rows = analysis.model_select(results)
    except ValueError as exc:
        raise NumericFailure(str(exc)) from None
    text = analysis.format_selection(rows, best)
    Path(args.out).write_text(f"# config\n{_comment(cfg.text)}{text}selected K = {best}\n")
    sys.stdout.write(text)
    print(f"selected K = {best}")
    return EXIT_OK


def _comment(text: str) -> str:
    return "".join(f"# {line}\n" for line in text.splitlines())


def cmd_benchmark(args) -> int:
    cfg = load_config(args.config)
    data = _load_data(cfg, args.data)
    spec = cfg.model_spec(data)
    conds = [bench.Condition(f"smc_T{t}", "smc", vars(cfg.smc(T=t)))
             for t in cfg.int_list("bench.smc.T")]
    conds += [bench.Condition(f"remc_S{s}", "remc", vars(cfg.remc(sweeps=s)))
              for s in cfg.int_list("bench.remc.sweeps")]
    for c in conds:
        c.params = {k: v for k, v in c.params.items() if k not in ("seed", "workers")}
    if not conds:
        raise ConfigError("bench.smc.T: no benchmark conditions configured")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: {exc}") from None
    try:
        table, _ = bench.benchmark(spec, data, conds, args.trials, seed=cfg.seed,
                                   workers=cfg.workers, parallel_trials=args.parallel_trials,
                                   save_dir=out / "reports")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    tsv = _comment(cfg.text) + table.to_tsv()
    (out / "bench.tsv").write_text(tsv)
    (out / "speedup.json").write_text(json.dumps({"speedup": bench.speedup(table)}))
    sys.stdout.write(table.to_tsv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bayespec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic spectrum and its truth file")
    g.add_argument("--family", required=True, choices=["gm3", "gm10", "gm30", "xrd", "xps"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, choices=XRD_SIZES, help="XRD grid size")
    g.add_argument("--k-true", type=int, default=7, help="XPS surrogate peak count")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run one sampler and write a report")
    f.add_argument("--sampler", required=True, choices=["smc", "remc"])
    f.add_argument("--config", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("model-select", help="fit a range of peak counts and pick the best")
    m.add_argument("--k-range", required=True)
    m.add_argument("--sampler", default="smc", choices=["smc", "remc"])
    m.add_argument("--config", required=True)
    m.add_argument("--data", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--trials", type=int, default=1)
    m.set_defaults(func=cmd_model_select)

    b = sub.add_parser("benchmark", help="repeated-trial convergence benchmark")
    b.add_argument("--config", required=True)
    b.add_argument("--data", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--parallel-trials", action="store_true",
                   help="run trials concurrently (timings become non-comparable)")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
