"""Command-line surface: evaluate, score, reduce, synth, sweep.

Exit codes: 0 success, 1 usage or config error, 2 data error (unreadable or
inconsistent input files, impossible episode requests, failing reducers),
3 internal assertion failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from itertools import product

from .config import (ConfigError, RunConfig, build_run_config, load_config_file,
                     parse_dims, parse_pool)
from .core import DataError
from .icnn import IcnnParams, backend_name, icnn_score_arrays, per_point_terms
from .pipeline import FIT_SETS, SCORE_SETS, EvalReport, evaluate
from .reducers import KINDS, ReducerFailure, ReducerSpec, fit_transform
from .storeio import FORMATS, load_labeled_set, load_store, save_labeled_set, save_store
from .synth import SynthSpec, generate_store

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; route through UsageError
    # so usage problems report exit code 1 instead
    def error(self, message):
        raise UsageError(message)


def _add_episode_flags(p: Parser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--store", help="embedding store file (csv or binary)")
    p.add_argument("--way", type=int, help="classes per episode")
    p.add_argument("--shot", type=int, help="support vectors per class")
    p.add_argument("--queries-per-class", type=int, help="query vectors per class")
    p.add_argument("--episodes", type=int, help="episode count")
    p.add_argument("--seed", type=int, help="run seed")
    p.add_argument("--workers", help="worker threads, integer or 'auto'")


def _add_icnn_flags(p: Parser) -> None:
    p.add_argument("--k", help="neighbor count, integer or 'auto'")
    p.add_argument("--p", type=float, help="distance-quality exponent")
    p.add_argument("--q", type=float, help="variance exponent")
    p.add_argument("--r", type=float, help="class-ratio exponent")
    p.add_argument("--one-shot-rule", choices=("drop_gamma", "zero_score"))
    p.add_argument("--degenerate-spread-value", type=float)


def _episode_flag_values(args) -> dict:
    return {"store": args.store, "way": args.way, "shot": args.shot,
            "queries_per_class": args.queries_per_class,
            "episodes": args.episodes, "seed": args.seed,
            "workers": args.workers}


def _icnn_flag_values(args) -> dict:
    return {"k": args.k, "p": args.p, "q": args.q, "r": args.r,
            "one_shot_rule": args.one_shot_rule,
            "degenerate_spread_value": args.degenerate_spread_value}


def _run_config(args, extra_flags: dict | None = None) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flags = _episode_flag_values(args)
    flags.update(extra_flags or {})
    return build_run_config(file_values, flags, _icnn_flag_values(args))


def _write_episode_csv(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,seed,accuracy,chosen,score\n")
        for r in report.records:
            fh.write(f"{r.index},{r.seed},{r.accuracy!r},{r.chosen},{r.score!r}\n")


def _write_episode_jsonl(report: EvalReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in report.records:
            fh.write(json.dumps({"index": r.index, "seed": r.seed,
                                 "accuracy": r.accuracy, "chosen": r.chosen,
                                 "score": r.score}) + "\n")


def _print_report(rc: RunConfig, report: EvalReport) -> None:
    print(f"episodes: {rc.episodes}   task: {rc.way}-way {rc.shot}-shot, "
          f"{rc.queries_per_class} queries/class")
    print(f"scoring backend: {backend_name()}")
    if report.diagnostic:
        print("NOTE: score_set=support_and_query_labels reveals query labels "
              "to the selector; results are diagnostic only")
    print(f"accuracy: {report.summary()}")
    q = report.quartiles
    print(f"quartiles: min {q[0]:.4f}  q1 {q[1]:.4f}  median {q[2]:.4f}  "
          f"q3 {q[3]:.4f}  max {q[4]:.4f}")
    print("selection histogram:")
    for name, count in sorted(report.selection_histogram.items(),
                              key=lambda kv: (-kv[1], kv[0])):
        print(f"  {name:<24} {count}")


def cmd_eval(args) -> int:
    rc = _run_config(args, {"pool": args.pool, "dims": args.dims,
                            "fit_set": args.fit_set, "score_set": args.score_set,
                            "episodes_csv": args.episodes_csv,
                            "episodes_jsonl": args.episodes_jsonl})
    if rc.store is None:
        raise UsageError("a store path is required (--store or config file)")
    store = load_store(rc.store)
    report = evaluate(store, rc.episode_spec(), rc.pipeline_config())
    _print_report(rc, report)
    if rc.episodes_csv:
        _write_episode_csv(report, rc.episodes_csv)
    if rc.episodes_jsonl:
        _write_episode_jsonl(report, rc.episodes_jsonl)
    return EXIT_OK


def cmd_score(args) -> int:
    labeled = load_labeled_set(args.file)
    try:
        k = 3 if args.k in (None, "auto") else int(args.k)
    except ValueError:
        raise UsageError(f"--k must be an integer or 'auto', got {args.k!r}")
    try:
        params = IcnnParams(k=k, p=args.p, q=args.q, r=args.r,
                            one_shot_rule=args.one_shot_rule,
                            degenerate_spread_value=args.degenerate_spread_value)
        score = icnn_score_arrays(labeled.vectors, labeled.class_ids, params)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.verbose:
        lam, om, gam = per_point_terms(labeled.vectors, labeled.class_ids, k,
                                       args.degenerate_spread_value)
        print("index label lambda omega gamma")
        for i, label in enumerate(labeled.labels):
            print(f"{i} {label} {lam[i]!r} {om[i]!r} {gam[i]!r}")
    print(f"icnn_score: {score!r}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    labeled = load_labeled_set(args.file)
    try:
        spec = ReducerSpec(args.kind, args.target_dim,
                           rbf_gamma=(args.rbf_gamma if args.rbf_gamma == "auto"
                                      else float(args.rbf_gamma)),
                           n_neighbors=(args.n_neighbors if args.n_neighbors == "auto"
                                        else int(args.n_neighbors)),
                           command=args.command)
    except ValueError as exc:
        raise UsageError(str(exc))
    reduced = fit_transform(spec, labeled.vectors, args.seed, n_fit=args.fit_rows)
    save_labeled_set(reduced.vectors, labeled.labels, args.out, args.format)
    print(f"wrote {reduced.vectors.shape[0]} rows x {reduced.vectors.shape[1]} dims "
          f"({spec.name}) to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = SynthSpec(args.classes, args.per_class, args.informative_dims,
                         args.noise_dims, args.separation, args.noise_scale,
                         args.seed)
    except ValueError as exc:
        raise UsageError(str(exc))
    store = generate_store(spec)
    save_store(store, args.out, args.format)
    flat = store.to_embedding_set()
    print(f"wrote {flat.n} vectors, {store.dim} dims, "
          f"{len(store.labels)} classes to {args.out}")
    return EXIT_OK


def _grid(raw: str | None, cast, base) -> list:
    if raw is None:
        return [base]
    values = [v for v in raw.split(",") if v]
    if not values:
        raise UsageError(f"empty grid: {raw!r}")
    return [cast(v) for v in values]


def _semicolon_grid(raw: str | None, cast, base) -> list:
    if raw is None:
        return [base]
    values = [v for v in raw.split(";") if v]
    if not values:
        raise UsageError(f"empty grid: {raw!r}")
    return [cast(v) for v in values]


def cmd_sweep(args) -> int:
    rc = _run_config(args)
    if rc.store is None:
        raise UsageError("a store path is required (--store or config file)")
    store = load_store(rc.store)
    spec = rc.episode_spec()

    int_or_auto = lambda v: v if v == "auto" else int(v)
    try:
        k_grid = _grid(args.k_grid, int_or_auto, rc.icnn.k)
        p_grid = _grid(args.p_grid, float, rc.icnn.p)
        q_grid = _grid(args.q_grid, float, rc.icnn.q)
        r_grid = _grid(args.r_grid, float, rc.icnn.r)
        dims_grid = _semicolon_grid(args.dims_grid, parse_dims, rc.dims)
        fit_grid = _grid(args.fit_set_grid, str, rc.fit_set)
        # empty pool segments are meaningful: no reduction pool (identity only)
        pool_grid = [rc.pool] if args.pool_grid is None else \
            [parse_pool(seg) for seg in args.pool_grid.split(";")]
    except ValueError as exc:
        raise UsageError(f"bad grid value: {exc}")

    rows = []
    for k, p, q, r, dims, fit_set, pool in product(
            k_grid, p_grid, q_grid, r_grid, dims_grid, fit_grid, pool_grid):
        if fit_set not in FIT_SETS:
            raise UsageError(f"fit_set must be one of {FIT_SETS}, got {fit_set!r}")
        cfg = rc.pipeline_config()
        cfg = replace(cfg, pool=tuple(pool), dims=tuple(dims), fit_set=fit_set,
                      icnn=replace(rc.icnn, k=k, p=p, q=q, r=r))
        report = evaluate(store, spec, cfg)
        pool_name = ",".join(s.kind for s in pool) if pool else "(identity only)"
        dims_name = ",".join(str(d) for d in dims)
        rows.append((k, p, q, r, dims_name, fit_set, pool_name,
                     report.mean_pct, report.ci95_pct))
        print(f"k={k} p={p} q={q} r={r} dims={dims_name} fit={fit_set} "
              f"pool={pool_name}  ->  {report.summary()}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("k,p,q,r,dims,fit_set,pool,mean_pct,ci95_pct\n")
            for row in rows:
                k, p, q, r, dims_name, fit_set, pool_name, mean, ci = row
                fh.write(f"{k},{p},{q},{r},{dims_name.replace(',', '+')},"
                         f"{fit_set},{pool_name.replace(',', '+')},"
                         f"{mean!r},{ci!r}\n")
    return EXIT_OK


def build_parser() -> Parser:
    parser = Parser(prog="fewshot-icnn",
                    description="Per-task dimensionality-reduction selection "
                                "for few-shot classification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[], help="episodic evaluation over a store")
    _add_episode_flags(p)
    p.add_argument("--pool", help="comma-separated reducer kinds (e.g. pca,isomap)")
    p.add_argument("--dims", help="comma-separated target dims (e.g. 6 or 4,8)")
    p.add_argument("--fit-set", choices=FIT_SETS)
    p.add_argument("--score-set", choices=SCORE_SETS)
    _add_icnn_flags(p)
    p.add_argument("--episodes-csv", help="write per-episode rows as CSV")
    p.add_argument("--episodes-jsonl", help="write per-episode rows as JSON lines")
    p.set_defaults(func=cmd_eval, pool=None, dims=None, fit_set=None,
                   score_set=None)

    p = sub.add_parser("score", help="ICNN score of one labeled file")
    p.add_argument("file", help="labeled vector file (csv or binary)")
    p.add_argument("--k", help="neighbor count (default 3)")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--one-shot-rule", choices=("drop_gamma", "zero_score"),
                   default="drop_gamma")
    p.add_argument("--degenerate-spread-value", type=float, default=0.5)
    p.add_argument("--verbose", action="store_true",
                   help="print per-point lambda/omega/gamma")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("reduce", help="apply one reducer to a labeled file")
    p.add_argument("file", help="labeled vector file (csv or binary)")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--target-dim", type=int, default=6)
    p.add_argument("--rbf-gamma", default="auto")
    p.add_argument("--n-neighbors", default="auto")
    p.add_argument("--command", default="", help="external reducer command line")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fit-rows", type=int, default=None,
                   help="fit on the first N rows only (default: all)")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("synth", help="generate a synthetic store")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--informative-dims", type=int, required=True)
    p.add_argument("--noise-dims", type=int, default=0)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--noise-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=FORMATS, default="csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="grid evaluation over scoring and pool settings")
    _add_episode_flags(p)
    _add_icnn_flags(p)
    p.add_argument("--k-grid", help="comma-separated k values (int or auto)")
    p.add_argument("--p-grid", help="comma-separated p values")
    p.add_argument("--q-grid", help="comma-separated q values")
    p.add_argument("--r-grid", help="comma-separated r values")
    p.add_argument("--dims-grid",
                   help="semicolon-separated dims lists (e.g. '6;4,8')")
    p.add_argument("--fit-set-grid", help="comma-separated fit_set values")
    p.add_argument("--pool-grid",
                   help="semicolon-separated pools; an empty segment means "
                        "identity only (e.g. 'pca,isomap;pca;')")
    p.add_argument("--out", help="write sweep rows as CSV")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ReducerFailure) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        cause = exc.__cause__
        if isinstance(cause, (DataError, ReducerFailure)):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # any other failure is a bug, not a usage problem
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
