"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.

    posetrss linext count|enum|heights|sample FILE.csv [--flips ...]
    posetrss simulate CONFIG.json [--seed S] [--threads T] [--iterations N] [--format csv|md] [--out DIR]
    posetrss estimate DATA.csv --design RPOR --m 3 --K 5 --n 2 --ranking A,B --target A,B --seed S
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import designs as dz
from . import linext
from .dataio import ConfigError, DataError, load_config, plan_from_config, run_artifact, validate_csv, now
from .estimators import estimate
from .poset import PosetError, build_poset, pairwise_correlations, suggest_sign_flips
from .simulation import emit_table, run_plan

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_flips(spec: str | None, columns: list[str], corr=None):
    if spec is None or spec == "none":
        return None
    if spec == "auto":
        flips = suggest_sign_flips(corr)
        return tuple(bool(f) for f in flips)
    chosen = [s.strip() for s in spec.split(",") if s.strip()]
    unknown = [c for c in chosen if c not in columns]
    if unknown:
        raise UsageError(f"--flips: unknown column(s) {', '.join(unknown)}")
    return tuple(c in chosen for c in columns)


def _read_elements(path, label_column):
    schema = validate_csv(path, label_column=label_column)
    labels = schema.labels or [str(i + 1) for i in range(schema.n_rows)]
    if len(set(labels)) != len(labels):
        raise DataError(f"{path}: element labels must be distinct")
    return schema, labels


def cmd_linext(args) -> int:
    schema, labels = _read_elements(args.file, args.label_column)
    corr = pairwise_correlations(schema.data, schema.columns) if args.flips == "auto" else None
    flips = _parse_flips(args.flips, schema.columns, corr)
    p = build_poset(schema.data, flips, labels=labels)
    out = sys.stdout
    if args.action == "count":
        count = linext.count_extensions(p)
        out.write(json.dumps({"count": count}) + "\n" if args.json else f"{count}\n")
    elif args.action == "enum":
        try:
            exts = linext.enumerate_extensions(p, args.cap)
        except linext.CapExceeded as exc:
            sys.stderr.write(f"more than {exc.cap} linear extensions; raise --cap\n")
            return EXIT_DATA
        named = [[labels[i] for i in e] for e in exts]
        if args.json:
            out.write(json.dumps({"extensions": named, "order": "bottom-first"}) + "\n")
        else:
            for e in named:
                out.write(" ".join(e) + "\n")
    elif args.action == "heights":
        if args.mc:
            hs = linext.mean_heights(p, "mc", draws=args.mc, rng=args.seed)
        else:
            hs = linext.mean_heights(p, "exact")
        if args.json:
            rows = [
                {"element": lab, "mean_height": float(h), "rounded_height": int(r)}
                for lab, h, r in zip(labels, hs.mean_height, hs.rounded_height)
            ]
            out.write(json.dumps({"exact": hs.exact, "n": hs.n_extensions_or_draws, "heights": rows}) + "\n")
        else:
            for lab, h, r in zip(labels, hs.mean_height, hs.rounded_height):
                out.write(f"{lab}\t{float(h)!r}\t{int(r)}\n")
    else:
        if args.seed is None:
            raise UsageError("sample: --seed is required")
        method = "mcmc" if args.mcmc else "auto"
        draws = linext.sample_extensions(p, args.draws, args.seed, method=method)
        named = [[labels[i] for i in d] for d in draws]
        if args.json:
            out.write(json.dumps({"draws": named, "order": "bottom-first"}) + "\n")
        else:
            for d in named:
                out.write(" ".join(d) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    base = Path(args.config).resolve().parent
    plan = plan_from_config(config, base, seed=args.seed, iterations=args.iterations)
    started = now()
    table = run_plan(plan, threads=args.threads)
    finished = now()
    if args.out is None:
        sys.stdout.write(emit_table(table, args.format))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "efficiency.csv").write_text(emit_table(table, "csv"))
    (out / "efficiency.md").write_text(emit_table(table, "md"))
    artifact = run_artifact(config, plan, table, started, finished)
    (out / "run.json").write_text(json.dumps(artifact, indent=2) + "\n")
    sys.stdout.write(emit_table(table, args.format))
    return EXIT_OK


def cmd_estimate(args) -> int:
    if args.seed is None:
        raise UsageError("estimate: --seed is required")
    ranking = [c.strip() for c in args.ranking.split(",") if c.strip()]
    target = [c.strip() for c in args.target.split(",") if c.strip()]
    roles = {}
    for c in ranking:
        roles[c] = "ranking"
    for c in target:
        roles[c] = "both" if c in roles else "target"
    schema = validate_csv(args.data, roles, label_column=args.label_column)
    need = args.m * args.K
    if schema.n_rows < need:
        raise DataError(f"{args.data}: {schema.n_rows} rows, at least m*K = {need} required")
    cols = list(dict.fromkeys(ranking + target))
    data = np.column_stack([schema.column(c) for c in cols])
    corr = None
    if args.flips == "auto":
        corr = pairwise_correlations(data[:, : len(ranking)], ranking)
    flips = _parse_flips(args.flips, ranking, corr)
    cfg = dz.DesignConfig(
        args.m,
        args.K,
        args.n,
        args.design,
        tuple(cols.index(c) for c in ranking),
        tuple(cols.index(c) for c in target),
        flips if flips and any(flips) else None,
        args.seed,
    )
    rng = cfg.rng()
    rows = rng.choice(schema.n_rows, size=need, replace=False)
    sets = data[rows].reshape(args.K, args.m, -1)
    pop = dz.build(sets, cfg, rng)
    alloc = dz.allocation_for(pop, args.n)
    samples = dz.draw_samples(pop, alloc, rng)
    report = estimate(pop, samples, alloc)
    report.variables = tuple(target)
    body = report.to_dict()
    body["seed"] = args.seed
    body["m"], body["K"], body["n"] = args.m, args.K, args.n
    body["sign_flips"] = None if cfg.sign_flips is None else dict(zip(ranking, cfg.sign_flips))
    if pop.design_kind == "CPOR":
        body["stratum_sizes"] = [int(k) for k in pop.stratum_sizes]
        body["mean_heights_exact"] = bool(np.all(pop.height_exact))
    sys.stdout.write(json.dumps(body, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="posetrss", description="Poset-based ranked set sampling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("linext", help="linear extensions of a set of element vectors")
    p.add_argument("action", choices=["count", "enum", "heights", "sample"])
    p.add_argument("file", help="CSV with a header row, one element per row")
    p.add_argument("--label-column", default=None, help="column holding element labels")
    p.add_argument("--flips", default=None, help="comma-separated columns to negate, 'auto' or 'none'")
    p.add_argument("--cap", type=int, default=None, help="enum: fail if there are more extensions than this")
    p.add_argument("--exact", action="store_true", help="heights: average over all extensions (default)")
    p.add_argument("--mc", type=int, default=None, metavar="N", help="heights: Monte Carlo over N draws")
    p.add_argument("--draws", type=int, default=1)
    p.add_argument("--mcmc", action="store_true", help="sample: force the Markov chain sampler")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_linext)

    p = sub.add_parser("simulate", help="run a Monte Carlo efficiency study")
    p.add_argument("config", help="JSON plan, a bundled name such as efficiency_grid.json, or a run.json artifact")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--format", choices=["csv", "md"], default="md")
    p.add_argument("--out", default=None, help="directory for efficiency.csv, efficiency.md and run.json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="one design pass over a data table")
    p.add_argument("data")
    p.add_argument("--design", choices=list(dz.DESIGNS), required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ranking", required=True, help="comma-separated ranking columns")
    p.add_argument("--target", required=True, help="comma-separated target columns")
    p.add_argument("--flips", default=None, help="ranking columns to negate, 'auto' or 'none'")
    p.add_argument("--label-column", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, dz.DesignError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except DataError as exc:
        for msg in exc.errors:
            sys.stderr.write(f"data error: {msg}\n")
        return EXIT_DATA
    except (PosetError, ValueError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
