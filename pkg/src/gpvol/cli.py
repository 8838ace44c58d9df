"""Command-line front end: synth | prepare | train | hedge | report.

Each command writes its artifacts under ``--out`` together with a
``manifest.txt`` (flat key=value) recording inputs, seeds and outputs, so any
run can be reproduced from its manifest. Exit codes: 0 success, 2 bad input
or configuration, 1 internal failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import os
import sys
import traceback
from dataclasses import fields as dataclass_fields, replace

from .blackscholes import NoRootError
from .evolution import CompiledSample, ConfigError, GPConfig, fitness, run
from .gptree import TreeParseError
from .hedging import (DegenerateHedgeError, VolSource, build_paths,
                      build_report, write_report_csv)
from .kvconfig import (KVError, kv_bool, kv_float, kv_floats, kv_int, kv_ints,
                       kv_str, kv_strs, load_kv, write_kv)
from .models import BINDINGS, BUILTIN_MODELS, load_builtin, read_model, write_model
from .quotes import (DEFAULT_MIN_DAYS, DEFAULT_MIN_QUOTE, DEFAULT_MONEYNESS_BAND,
                     QuoteParseError, QuoteValidationError, SCHEMES, apply_filters,
                     build_partition, filter_counts, load_quotes, read_partition,
                     write_partition, write_quotes_csv)
from .subsetsel import POLICIES, SubsetSchedule
from .synthmarket import MarketSpec, generate_quotes, smile_vol

SUMMARY_COLUMNS = ("family", "seed", "train_mse", "test_mse", "mse_total",
                   "mse_total_std")
LOG_COLUMNS = ("generation", "sample", "best_mse", "mean_mse", "activated",
               "weight")

# hedge --strategy tokens; "gamma"/"vega" stand for the delta-augmented pair
_STRATEGY_TOKENS = {
    "delta": "delta",
    "gamma": "delta_gamma",
    "vega": "delta_vega",
    "delta_gamma": "delta_gamma",
    "delta_vega": "delta_vega",
}

_FAMILY_SCHEME = {"ts": "S", "mtm": "C", "global": "G"}
_FAMILY_POLICY = {"rss": "R", "sss": "S", "asss": "AS", "arss": "AR"}

_USER_ERRORS = (KVError, ConfigError, QuoteParseError, QuoteValidationError,
                TreeParseError, NoRootError, DegenerateHedgeError, OSError,
                ValueError)

_INT_KEYS = {"population_size", "offspring_size", "max_generations",
             "generations_per_sample", "init_depth_min", "init_depth_max",
             "max_depth", "tournament_size", "seed"}
_FLOAT_KEYS = {"p_crossover", "p_branch", "p_point", "p_expansion"}
_BOOL_KEYS = {"reorder_each_activation"}

_SPEC_KEYS = {"s0", "rate", "days", "strikes", "expiries", "spread", "seed",
              "start", "kinds", "vol_base", "vol_smile", "vol_term", "path_vol"}


def config_from_kv(kv: dict[str, str]) -> GPConfig:
    """Build a GPConfig from config-file pairs; unknown keys are rejected."""
    known = {f.name for f in dataclass_fields(GPConfig)}
    unknown = sorted(set(kv) - known)
    if unknown:
        raise KVError(f"unknown config keys: {', '.join(unknown)}")
    kwargs: dict = {}
    for key in kv:
        if key in _INT_KEYS:
            kwargs[key] = kv_int(kv, key)
        elif key in _FLOAT_KEYS:
            kwargs[key] = kv_float(kv, key)
        elif key in _BOOL_KEYS:
            kwargs[key] = kv_bool(kv, key)
        else:
            kwargs[key] = kv_str(kv, key)
    return GPConfig(**kwargs)


def market_spec_from_kv(kv: dict[str, str]) -> MarketSpec:
    """Build a MarketSpec from spec-file pairs.

    The true volatility is vol_base + vol_smile*(S/K - 1)^2 + vol_term*tau; a
    plain constant when smile and term are zero.
    """
    unknown = sorted(set(kv) - _SPEC_KEYS)
    if unknown:
        raise KVError(f"unknown spec keys: {', '.join(unknown)}")
    base = kv_float(kv, "vol_base")
    smile = kv_float(kv, "vol_smile", 0.0)
    term = kv_float(kv, "vol_term", 0.0)
    vol = base if smile == 0.0 and term == 0.0 else smile_vol(base, smile, term)
    raw_start = kv_str(kv, "start", "2003-01-02")
    try:
        start = dt.date.fromisoformat(raw_start)
    except ValueError:
        raise KVError(f"start: expected an ISO date, got {raw_start!r}") from None
    return MarketSpec(
        s0=kv_float(kv, "s0"),
        rate=kv_float(kv, "rate"),
        vol=vol,
        n_days=kv_int(kv, "days"),
        strikes=kv_floats(kv, "strikes"),
        expiry_days=kv_ints(kv, "expiries"),
        spread=kv_float(kv, "spread", 0.0),
        seed=kv_int(kv, "seed", 1),
        start=start,
        kinds=kv_strs(kv, "kinds", ("call",)),
        path_vol=kv_float(kv, "path_vol", None),
    )


def _utc_now() -> str:
    return dt.datetime.now(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _write_manifest(out_dir: str, command: str, inputs: list[str],
                    outputs: list[str], extra: dict | None = None) -> str:
    pairs: dict[str, object] = {"command": command, "created_utc": _utc_now()}
    if extra:
        pairs.update(extra)
    pairs["inputs"] = ",".join(inputs)
    names = sorted({os.path.relpath(p, out_dir) for p in outputs} | {"manifest.txt"})
    pairs["outputs"] = ",".join(names)
    path = os.path.join(out_dir, "manifest.txt")
    write_kv(path, pairs)
    return path


def _parse_band(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"--moneyness-band wants 'lo,hi', got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise ValueError(f"--moneyness-band needs lo < hi, got {text!r}")
    return lo, hi


def _filtered_quotes(args) -> tuple[list, dict[str, int], int]:
    quotes = load_quotes(args.quotes)
    band = _parse_band(args.moneyness_band)
    counts = filter_counts(quotes, args.min_days, args.min_quote, band)
    kept = apply_filters(quotes, args.min_days, args.min_quote, band)
    return kept, counts, len(quotes)


def cmd_synth(args) -> int:
    spec = market_spec_from_kv(load_kv(args.spec))
    quotes = generate_quotes(spec)
    os.makedirs(args.out, exist_ok=True)
    quotes_path = os.path.join(args.out, "quotes.csv")
    write_quotes_csv(quotes, quotes_path)
    _write_manifest(args.out, "synth", [args.spec], [quotes_path],
                    {"seed": spec.seed, "n_quotes": len(quotes)})
    print(f"wrote {len(quotes)} quotes to {quotes_path}")
    return 0


def cmd_prepare(args) -> int:
    kept, counts, total = _filtered_quotes(args)
    partition = build_partition(kept, args.scheme, k=args.k)
    written = write_partition(partition, args.out)

    for reason in sorted(counts):
        print(f"dropped {counts[reason]} quotes: {reason}", file=sys.stderr)
    if partition.dropped:
        print(f"dropped {partition.dropped} quotes: no implied volatility",
              file=sys.stderr)

    extra = {"scheme": partition.scheme, "k": partition.k,
             "quotes_total": total, "quotes_kept": len(kept),
             "dropped_no_implied_vol": partition.dropped}
    extra.update({f"dropped_{reason}": n for reason, n in sorted(counts.items())})
    _write_manifest(args.out, "prepare", [args.quotes], written, extra)
    n_sets = len(partition.samples) + sum(1 for t in partition.test_sets
                                          if t not in partition.samples)
    print(f"wrote {n_sets} sample files to {args.out}")
    return 0


def _write_log_csv(path: str, log) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_COLUMNS)
        for entry in log:
            writer.writerow([entry.generation, entry.sample, repr(entry.best_mse),
                             repr(entry.mean_mse), int(entry.activated),
                             "" if entry.weight is None else repr(entry.weight)])


def _train_jobs(partition, policy: str, cfg: GPConfig) -> list[tuple]:
    """(family, schedule, samples, test records) for every model family the
    policy defines on this partition."""
    scheme = partition.scheme
    training = partition.training_sets()
    if not training:
        raise ConfigError("partition has no training samples")

    if policy == "static":
        if scheme == "global":
            raise ConfigError("static policy needs a ts or mtm partition")
        jobs = []
        for i, (name, recs) in enumerate(training, start=1):
            if scheme == "ts":
                family = f"M{i}S{i}"
                test = partition.samples[f"S{i + 1}"]
            else:
                family = f"M{i}C{i}"
                test = partition.test_sets[f"C{i}T"]
            schedule = SubsetSchedule.static(1, g=cfg.generations_per_sample)
            jobs.append((family, schedule, [(name, recs)], test))
        return jobs

    family = f"M{_FAMILY_SCHEME[scheme]}{_FAMILY_POLICY[policy]}"
    test: list = []
    for recs in partition.test_sets.values():
        test.extend(recs)
    schedule = SubsetSchedule(policy, len(training), cfg.generations_per_sample)
    return [(family, schedule, training, tuple(test))]


def cmd_train(args) -> int:
    cfg = config_from_kv(load_kv(args.config)) if args.config else GPConfig()
    partition = read_partition(args.partition)
    if args.scheme and args.scheme != partition.scheme:
        raise ConfigError(f"--scheme {args.scheme} does not match the "
                          f"{partition.scheme} partition in {args.partition}")
    if args.seeds < 1:
        raise ConfigError(f"--seeds must be >= 1, got {args.seeds}")

    jobs = _train_jobs(partition, args.policy, cfg)
    eval_records = partition.enlarged()
    seeds = [cfg.seed + j for j in range(args.seeds)]
    os.makedirs(args.out, exist_ok=True)

    rows = []
    outputs = []
    for family, schedule, samples, test_records in jobs:
        test_sample = CompiledSample.from_records("test", test_records)
        for seed in seeds:
            result = run(replace(cfg, seed=seed), schedule, samples, eval_records)
            model_path = os.path.join(args.out, f"{family}_seed{seed}.expr")
            write_model(model_path, result.best.tree, args.binding)
            log_path = os.path.join(args.out, f"{family}_seed{seed}_log.csv")
            _write_log_csv(log_path, result.log)
            outputs.extend([model_path, log_path])
            rows.append((family, seed, result.best.fitness,
                         fitness(result.best.tree, test_sample),
                         result.mse_total, result.mse_total_std))

    rows.sort(key=lambda r: r[4])
    summary_path = os.path.join(args.out, "summary.csv")
    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for family, seed, train_mse, test_mse, total, std in rows:
            writer.writerow([family, seed, repr(train_mse), repr(test_mse),
                             repr(total), repr(std)])
    outputs.append(summary_path)

    inputs = [args.partition] + ([args.config] if args.config else [])
    _write_manifest(args.out, "train", inputs, outputs,
                    {"policy": args.policy, "scheme": partition.scheme,
                     "binding": args.binding,
                     "seeds": ",".join(str(s) for s in seeds)})
    best = rows[0]
    print(f"trained {len(rows)} models; best {best[0]} seed {best[1]} "
          f"mse_total {best[4]:.6g}")
    return 0


def _resolve_model(name: str):
    if name in BUILTIN_MODELS:
        return load_builtin(name)
    if os.path.exists(name):
        return read_model(name)
    known = ", ".join(sorted(BUILTIN_MODELS))
    raise ValueError(f"--model {name!r} is neither a builtin ({known}) nor a file")


def _load_contracts(path: str) -> list[tuple[float, dt.date, str]]:
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ("strike", "expiry_date", "kind")
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in need):
            raise ValueError(f"{path}: expected columns {', '.join(need)}")
        out = []
        for row in reader:
            out.append((float(row["strike"]),
                        dt.date.fromisoformat(row["expiry_date"]),
                        row["kind"].strip()))
    return out


def cmd_hedge(args) -> int:
    sources: dict[str, VolSource] = {}
    binding = None
    if args.model:
        tree, binding = _resolve_model(args.model)
        sources["GP"] = VolSource.from_tree(tree)
    if args.bs:
        sources["BS"] = VolSource.black_scholes()
    if not sources:
        raise ValueError("nothing to hedge with: pass --bs and/or --model")

    kept, _, _ = _filtered_quotes(args)
    if binding is not None:
        # a formula is fitted on one option kind; keep comparisons on it
        kept = [q for q in kept if q.kind == binding]
    contracts = _load_contracts(args.contracts) if args.contracts else None

    tokens = [t.strip() for t in args.strategy.split(",") if t.strip()]
    bad = [t for t in tokens if t not in _STRATEGY_TOKENS]
    if bad:
        raise ValueError(f"unknown strategies: {', '.join(bad)}; "
                         f"choose from delta, gamma, vega")
    strategies = []
    for t in tokens:
        mapped = _STRATEGY_TOKENS[t]
        if mapped not in strategies:
            strategies.append(mapped)
    frequencies = kv_ints({"freq": args.freq}, "freq")
    if not frequencies or any(f < 1 for f in frequencies):
        raise ValueError(f"--freq wants positive day counts, got {args.freq!r}")

    paths = build_paths(kept, contracts)
    if not paths:
        raise ValueError("no hedgeable contracts: need a contract quoted on "
                         "at least two dates after filtering")
    report = build_report(paths, sources, strategies, frequencies)

    for note in report.notes:
        print(f"skipped: {note}", file=sys.stderr)

    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, "report.csv")
    write_report_csv(report, report_path)
    outputs = [report_path]
    if args.long:
        long_path = os.path.join(args.out, "report_long.csv")
        write_report_csv(report, long_path, long_format=True)
        outputs.append(long_path)

    extra = {"models": ",".join(sorted(sources)), "strategies": ",".join(strategies),
             "frequencies": ",".join(str(f) for f in frequencies),
             "n_paths": len(paths), "n_cells": len(report.cells)}
    if report.win_rate is not None:
        extra["win_rate"] = repr(report.win_rate)
    inputs = [args.quotes] + ([args.model] if args.model else []) \
        + ([args.contracts] if args.contracts else [])
    _write_manifest(args.out, "hedge", inputs, outputs, extra)

    print(f"hedged {len(paths)} contracts into {len(report.cells)} cells")
    if report.win_rate is not None:
        print(f"win rate (model vs baseline): {report.win_rate:.4f} "
              f"({report.win_cells}/{report.total_cells} cells)")
    return 0


def cmd_report(args) -> int:
    inputs = [p.strip() for p in args.inputs.split(",") if p.strip()]
    if not inputs:
        raise ValueError("--inputs wants a comma list of summary.csv paths")
    rows = []
    for path in inputs:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in SUMMARY_COLUMNS
                       if reader.fieldnames is None or c not in reader.fieldnames]
            if missing:
                raise ValueError(f"{path}: missing columns {', '.join(missing)}")
            for row in reader:
                rows.append([row[c] for c in SUMMARY_COLUMNS] + [os.path.basename(path)])
    rows.sort(key=lambda r: float(r[4]))

    os.makedirs(args.out, exist_ok=True)
    ranking_path = os.path.join(args.out, "ranking.csv")
    with open(ranking_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS + ("source",))
        writer.writerows(rows)
    _write_manifest(args.out, "report", inputs, [ranking_path],
                    {"n_models": len(rows)})
    print(f"merged {len(rows)} models from {len(inputs)} summaries")
    return 0


def _add_filter_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--min-days", type=int, default=DEFAULT_MIN_DAYS,
                   help="drop quotes closer to expiry than this many days")
    p.add_argument("--min-quote", type=float, default=DEFAULT_MIN_QUOTE,
                   help="drop quotes with a smaller mid price")
    p.add_argument("--moneyness-band",
                   default=f"{DEFAULT_MONEYNESS_BAND[0]},{DEFAULT_MONEYNESS_BAND[1]}",
                   help="keep quotes with S/K inside 'lo,hi'")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpvol",
        description="Evolve implied-volatility formulas from option quotes "
                    "and backtest them in dynamic hedging.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic quotes from a market spec")
    p.add_argument("--spec", required=True, help="key=value market spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="filter quotes and write training partitions")
    p.add_argument("--quotes", required=True, help="quote CSV file")
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--k", type=int, default=10,
                   help="number of time-series samples (ts/global schemes)")
    _add_filter_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="evolve volatility models on a partition")
    p.add_argument("--config", help="GP parameter file (key=value)")
    p.add_argument("--partition", required=True, help="directory written by prepare")
    p.add_argument("--policy", required=True, choices=POLICIES)
    p.add_argument("--scheme", choices=SCHEMES,
                   help="sanity check against the partition's scheme")
    p.add_argument("--seeds", type=int, default=1,
                   help="number of seeds, counting up from the config seed")
    p.add_argument("--binding", choices=BINDINGS, default="call",
                   help="option kind recorded in the model files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hedge", help="backtest hedging with model and/or baseline vols")
    p.add_argument("--quotes", required=True, help="quote CSV file")
    p.add_argument("--bs", action="store_true",
                   help="hedge with implied volatilities (baseline)")
    p.add_argument("--model", help="model file or builtin name")
    p.add_argument("--strategy", default="delta",
                   help="comma list of delta, gamma, vega")
    p.add_argument("--freq", default="1",
                   help="comma list of rebalancing gaps in days")
    p.add_argument("--long", action="store_true",
                   help="also write the per-option error table")
    p.add_argument("--contracts", help="CSV of strike,expiry_date,kind to hedge")
    _add_filter_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_hedge)

    p = sub.add_parser("report", help="merge train summaries into one ranking")
    p.add_argument("--inputs", required=True,
                   help="comma list of summary.csv paths")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc(file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
