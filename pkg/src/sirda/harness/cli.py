"""Command-line entry point: ``sirda <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, MissingSeries, NumericalError
from ..synthesis import SyntheticDataset, generate_dataset
from .config import GenerationSpec, ScenarioConfig, load_config
from .plotdata import FIGURES, emit_plot_data
from .runner import SWEEP_DEFAULT, compare_cases, load_artifact, run_scenario, sweep_sigma_d

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _scenario_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--mode", choices=["state", "constant_params", "tracking"])
    p.add_argument("--case", help="observation case 1-4")
    p.add_argument("--n-ensemble", type=int, dest="n_ensemble")
    p.add_argument("--sigma-c", type=float, dest="sigma_c")
    p.add_argument("--sigma-d", type=float, dest="sigma_d")
    p.add_argument("--sigma-e", type=float, dest="sigma_e")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--dataset", help="dataset JSON written by `sirda generate`")
    p.add_argument("--data-seed", type=int, help="seed for a generated dataset")
    p.add_argument("--out", required=True, help="output directory")


def _config_from(args) -> ScenarioConfig:
    flags = {k: getattr(args, k, None) for k in
             ("mode", "case", "n_ensemble", "sigma_c", "sigma_d", "sigma_e", "seed",
              "replicates", "workers", "dataset")}
    cfg = load_config(args.config, flags)
    if getattr(args, "data_seed", None) is not None:
        gen = cfg.generation
        cfg = cfg.with_(generation=GenerationSpec(args.data_seed, gen.horizon_years, gen.gen_case,
                                                  gen.noise_kind, gen.noise_sigma))
    return cfg


def cmd_generate(args):
    gen = GenerationSpec(args.seed, args.years, int(args.case), args.noise, args.noise_sigma)
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    ds = generate_dataset(cfg.params, gen.gen_case, gen.noise_model(), gen.horizon_years, gen.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds.save(out)
    ds.to_csv(out.with_suffix(".csv"))
    print(f"wrote {out} ({len(ds.times)} observations, burn-in {ds.burn_in_years} years)")


def _print_summary(tag, art):
    agg = art.aggregate
    parts = [f"{m}={agg[m]['median']:.4g}" for m in ("mse_s", "mse_i", "gamma",
                                                     "rel_err_b0", "rel_err_b1",
                                                     "beta_coverage") if m in agg]
    print(f"{tag}: " + " ".join(parts))


def cmd_run(args):
    cfg = _config_from(args)
    art = run_scenario(cfg, args.out)
    _print_summary(f"{cfg.mode} case {cfg.case} [{art.config_hash}]", art)


def cmd_compare(args):
    cfg = _config_from(args)
    cases = [int(c) for c in args.cases.split(",")]
    arts = compare_cases(cfg, cases, args.out)
    for c, art in arts.items():
        _print_summary(f"{cfg.mode} case {c}", art)


def cmd_sweep(args):
    cfg = _config_from(args)
    values = [float(v) for v in args.values.split(",")]
    cases = [int(c) for c in args.cases.split(",")] if args.cases else None
    art = sweep_sigma_d(cfg, values, args.replicates or 10, cases, args.out)
    for row in art.table("mse_s"):
        print(f"case {row['case']} sigma_d={row['sigma_d']:g}: mean MSE_S={row['mean']:.4g}")


def cmd_consistency(args):
    cfg = _config_from(args)
    values = [float(v) for v in args.values.split(",")]
    cases = [int(c) for c in args.cases.split(",")]
    art = sweep_sigma_d(cfg.with_(mode="state"), values, args.replicates or 5, cases, args.out)
    for row in art.table("gamma"):
        print(f"case {row['case']} sigma_d={row['sigma_d']:g}: gamma={row['mean']:.4f}")


def cmd_plot_data(args):
    path = Path(args.artifact)
    if path.is_file() and path.suffix == ".json" and path.name not in ("run.json", "sweep.json"):
        art = SyntheticDataset.load(path)
    else:
        art = load_artifact(path)
    for p in emit_plot_data(art, args.figure, args.out, svg=args.svg):
        print(p)


def build_parser():
    ap = argparse.ArgumentParser(prog="sirda", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesise a dataset")
    g.add_argument("--config")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--years", type=int, default=10)
    g.add_argument("--case", default="4")
    g.add_argument("--noise", choices=["additive", "multiplicative"], default="additive")
    g.add_argument("--noise-sigma", type=float, default=0.1, dest="noise_sigma")
    g.add_argument("--out", required=True, help="dataset JSON path (a CSV is written alongside)")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one scenario")
    _scenario_flags(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="one mode under several observation cases")
    _scenario_flags(c)
    c.add_argument("--cases", default="1,2,3,4")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="observation-noise sweep")
    _scenario_flags(s)
    s.add_argument("--values", default=",".join(f"{v:g}" for v in SWEEP_DEFAULT))
    s.add_argument("--cases")
    s.set_defaults(func=cmd_sweep)

    k = sub.add_parser("consistency", help="consistency ratio per case and noise level")
    _scenario_flags(k)
    k.add_argument("--values", default=",".join(f"{v:g}" for v in SWEEP_DEFAULT))
    k.add_argument("--cases", default="1,2,3,4")
    k.set_defaults(func=cmd_consistency)

    p = sub.add_parser("plot-data", help="emit CSVs behind a figure")
    p.add_argument("artifact", help="run/sweep directory or JSON, or a dataset JSON")
    p.add_argument("--figure", required=True, choices=sorted(FIGURES))
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true", help="also render SVG line charts")
    p.set_defaults(func=cmd_plot_data)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingSeries as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
