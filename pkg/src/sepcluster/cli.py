"""Command-line harness: ``sepcluster {generate,cluster,verify,sweep}``.

Exit codes: 0 ok, 1 some verification check failed, 2 bad input.
The output directory is ``--out``, else ``$SEPCLUSTER_OUT``, else the
config's ``out``, else ``./sepcluster-out``.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, io
from .algorithm import ClusterOptions, cluster
from .errors import SepClusterError
from .experiment import (
    AGG_COLUMNS,
    SUMMARY_COLUMNS,
    TRIAL_COLUMNS,
    ExperimentConfig,
    aggregate_rows,
    csv_text,
    generate_instance,
    run_sweep,
    summary_rows,
    write_plots,
)
from .model import separation_constant, spectral_stats

log = logging.getLogger("sepcluster")

OUT_ENV = "SEPCLUSTER_OUT"
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class UsageError(SepClusterError):
    pass


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_dict(io.read_json(path))


def parse_suites(text: str | None, default) -> tuple:
    if text is None:
        return tuple(default)
    suites = tuple(s.strip() for s in text.split(",") if s.strip())
    if not suites:
        raise UsageError("--suite selects no verifier")
    if suites == ("all",):
        return analysis.SUITES
    unknown = [s for s in suites if s not in analysis.SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {unknown}; choose from {', '.join(analysis.SUITES)}")
    return suites


def output_dir(args, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or cfg.out or "sepcluster-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seed(args, cfg: ExperimentConfig) -> int:
    return cfg.master_seed if args.seed is None else args.seed


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    seed = _seed(args, cfg)
    out = output_dir(args, cfg)
    A, T, cert = generate_instance(cfg.generator, seed)
    meta = io.meta_block(cfg.to_dict(), seed)
    io.write_matrix_csv(out / "dataset.csv", A, meta)
    io.write_labels(out / "labels.json", T, meta)
    io.write_json(out / "certificate.json", cert, meta)
    print(out / "dataset.csv")
    return EXIT_OK


def _cluster_options(args, cfg: ExperimentConfig) -> ClusterOptions:
    opts = cfg.options
    return ClusterOptions(
        seed=opts.seed if args.seed is None else args.seed,
        max_iter=opts.max_iter if args.max_iter is None else args.max_iter,
        run_part3=opts.run_part3 and not args.no_part3,
    )


def cmd_cluster(args) -> int:
    cfg = load_config(args.config)
    A = io.read_matrix(args.dataset)
    k = cfg.generator.k if args.k is None else args.k
    opts = _cluster_options(args, cfg)
    out = output_dir(args, cfg)
    run = cluster(A, k, opts)
    if not run.part3_converged:
        log.warning("Lloyd steps hit max_iter=%d without converging", opts.max_iter)
    payload = run.to_json()
    payload["options"] = dataclasses.asdict(opts)
    io.write_json(out / "result.json", payload, io.meta_block(cfg.to_dict(), opts.seed))
    print(out / "result.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    suites = parse_suites(args.suite, cfg.suites)
    A = io.read_matrix(args.dataset)
    raw = io.read_labels(args.labels)
    T = io.target_from_labels(A, raw)
    opts = _cluster_options(args, cfg)
    out = output_dir(args, cfg)
    stats = spectral_stats(A, T)
    if "delta_override" in raw:
        delta = np.asarray(raw["delta_override"], dtype=float)
        if delta.shape != (T.k,):
            raise UsageError(f"delta_override needs {T.k} entries")
        stats = dataclasses.replace(stats, delta=delta, separation_c=separation_constant(T.means, delta))
        log.warning("using delta_override from %s", args.labels)
    run = cluster(A, T.k, opts)
    checks = analysis.run_suites(A, T, run, suites, args.gamma, stats)
    meta = io.meta_block(cfg.to_dict(), opts.seed)
    io.write_jsonl(out / "checks.jsonl", [dict(dataclasses.asdict(ch), meta=meta) for ch in checks])
    summary = summary_rows(checks)
    (out / "aggregate.csv").write_text(csv_text(summary, SUMMARY_COLUMNS, meta))
    failed = [ch for ch in checks if not ch.holds]
    for row in summary:
        print(f"{row['fact_id']:<14} trials={row['trials']:<4} failures={row['failures']:<3} "
              f"worst lhs/rhs={row['worst_ratio']:.4g}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if args.suite is not None:
        cfg = dataclasses.replace(cfg, suites=parse_suites(args.suite, cfg.suites))
    out = output_dir(args, cfg)
    rows, checks = run_sweep(cfg, args.jobs)
    meta = io.meta_block(cfg.to_dict(), cfg.master_seed)
    agg = aggregate_rows(rows)
    (out / "trials.csv").write_text(csv_text(rows, TRIAL_COLUMNS, meta))
    (out / "aggregate.csv").write_text(csv_text(agg, AGG_COLUMNS, meta))
    plain_checks = [ch for _, ch in checks]
    (out / "checks_aggregate.csv").write_text(csv_text(summary_rows(plain_checks), SUMMARY_COLUMNS, meta))
    io.write_jsonl(out / "checks.jsonl",
                   [dict(dataclasses.asdict(ch), trial_row=i) for i, ch in checks])
    io.write_json(out / "config.json", cfg.to_dict(), meta)
    write_plots(agg, out)
    failures = sum(not ch.holds for ch in plain_checks)
    print(f"{len(rows)} trials, {len(plain_checks)} checks, {failures} failed -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="experiment config JSON")
    common.add_argument("--seed", type=int, metavar="U64", help="seed (overrides the config)")
    common.add_argument("--out", metavar="DIR", help=f"output directory (default ${OUT_ENV})")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sepcluster", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write dataset.csv, labels.json, certificate.json")
    p.set_defaults(func=cmd_generate)

    def algo_flags(p):
        p.add_argument("--max-iter", type=int, help="cap on Lloyd steps")
        p.add_argument("--no-part3", action="store_true", help="stop after re-centering")

    p = sub.add_parser("cluster", parents=[common], help="run the clustering algorithm")
    p.add_argument("dataset", help="matrix CSV (or .json wrapper)")
    p.add_argument("--k", type=int, help="number of clusters (default: config generator.k)")
    algo_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("verify", parents=[common], help="cluster and check every selected inequality")
    p.add_argument("dataset")
    p.add_argument("labels", help="labels JSON {k, labels}")
    p.add_argument("--suite", metavar="LIST", help=f"comma-separated subset of: {', '.join(analysis.SUITES)}")
    p.add_argument("--gamma", type=float, default=1.0, help="margin multiplier for good points")
    algo_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="run a parameter grid and write CSVs and plots")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel trial processes")
    p.add_argument("--suite", metavar="LIST")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except SepClusterError as exc:
        where = f" (part {exc.part})" if exc.part else ""
        print(f"sepcluster: error{where}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"sepcluster: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
