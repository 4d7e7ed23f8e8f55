"""Command-line front end.

Subcommands::

    clean        --config PATH
    generate     --n INT --dup-rate FLOAT --max-edits INT --seed INT --out PATH
    optimize     --benchmark NAME --dims INT --generations INT --seed INT --out PATH
    report-merge PATHS... --out PATH

Exit codes: 0 success, 2 configuration error, 3 input error, 4 run error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .ais_core import ClonalParams, run as clonal_run
from .benchmarks import benchmark_objective
from .config import parse_config, read_records, read_truth, write_records, write_truth
from .controller import Controller, DedupGenerator, batched
from .errors import ConfigurationError, InputError, ObesityHeuristicError, RunError
from .evaluation import METRIC_COLUMNS, metrics_table, score_run
from .synth import SCHEMA, inject_duplicates, make_clean_records

log = logging.getLogger("obesity_heuristic")

EXIT_OK = 0
EXIT_CODES = {ConfigurationError: 2, InputError: 3, RunError: 4}


def exit_code(exc: Exception) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            return code
    return EXIT_CODES[RunError]


def _fmt(v):
    if v is None:
        return "undefined"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def summary_table(report: dict) -> str:
    t = report["omega_tally"]
    reasons = {}
    for inv in report["immune_invocations"]:
        for r in inv["reasons"]:
            reasons[r] = reasons.get(r, 0) + 1
    rows = [
        ("cycles", len(report["cycles"])),
        ("fatty-acid units", t["total"]),
        ("omega-3 (performance)", t["omega3_count"]),
        ("omega-6 backlog", t["omega6_count"]),
        ("rejected", t["rejected_count"]),
        ("immune invocations", len(report["immune_invocations"])),
    ]
    rows += [(f"  reason {r}", n) for r, n in sorted(reasons.items())]
    m = report.get("metrics")
    if m:
        rows += [(col, m[col]) for col in METRIC_COLUMNS[1:]]
    width = max(len(k) for k, _ in rows)
    lines = [f"{k.ljust(width)}  {_fmt(v)}" for k, v in rows]
    return "\n".join(lines) + "\n"


def command_clean(config) -> int:
    """Run the cleaning loop described by ``config`` and write its outputs."""
    cfg = parse_config(config) if not hasattr(config, "echo") else config
    records = read_records(cfg.input, cfg.schema)
    truth = read_truth(cfg.truth) if cfg.truth is not None else None
    generator = DedupGenerator(
        len(cfg.schema),
        window=cfg.window,
        key_spec=cfg.key_spec,
        policy=cfg.policy,
        clonal=cfg.clonal,
        truth=truth,
        calibration_size=cfg.calibration_size,
    )
    ctl = Controller(cfg.registry(), cfg.trigger, generator, cfg.routing, cfg.seed)
    for batch in batched(records, cfg.batch_size):
        ctl.cycle(batch)
    metrics = None
    if truth is not None:
        metrics = score_run([u.payload for u in ctl.units], truth).to_dict()
    report = ctl.report(config_echo=cfg.echo, metrics=metrics)

    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json())
    doc = report.to_dict()
    out.with_suffix(".summary.txt").write_text(summary_table(doc))
    if metrics is not None:
        out.with_suffix(".metrics.csv").write_text(metrics_table([(out.stem, metrics)]))
    log.info("report written to %s", out)
    return EXIT_OK


def truth_path_for(out_path) -> Path:
    out = Path(out_path)
    return out.with_name(out.stem + ".truth.csv")


def command_generate(n, dup_rate, max_edits, seed, out_path, truth_path=None) -> int:
    """Write a dirty dataset and its truth pairs."""
    if int(n) != n or n < 0:
        raise ConfigurationError(f"--n must be a non-negative integer, got {n!r}")
    if seed < 0:
        raise ConfigurationError(f"--seed must be non-negative, got {seed}")
    clean_seed, dirty_seed = np.random.SeedSequence(seed).generate_state(2)
    clean = make_clean_records(n, int(clean_seed))
    dirty, truth = inject_duplicates(clean, dup_rate, max_edits, int(dirty_seed))
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_records(out, dirty, SCHEMA)
    write_truth(truth_path or truth_path_for(out), truth)
    return EXIT_OK


def command_optimize(benchmark, dims, generations, seed, out_path, **clonal) -> int:
    """Run clonal selection on a benchmark and write its best-fitness history."""
    objective = benchmark_objective(benchmark, dims)
    params = ClonalParams(max_generations=generations, seed=seed, **clonal)
    result = clonal_run(objective, params)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["generation", "best_fitness"])
        for g, f in result.history_pairs():
            writer.writerow([g, repr(f)])
    return EXIT_OK


def command_report_merge(paths, out_path) -> int:
    """Concatenate metric rows from run reports (JSON) and metric tables (CSV)."""
    rows = []
    for p in map(Path, paths):
        try:
            text = p.read_text()
        except OSError as exc:
            raise InputError(f"cannot read {p}: {exc}") from exc
        if p.suffix == ".json":
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InputError(f"{p}: malformed report: {exc}") from exc
            if not doc.get("metrics"):
                raise InputError(f"{p}: report has no metrics (run without a truth file?)")
            rows.append((p.stem, doc["metrics"]))
        else:
            reader = csv.DictReader(text.splitlines())
            if reader.fieldnames != METRIC_COLUMNS:
                raise InputError(f"{p}: not a metrics table")
            for r in reader:
                vals = {k: (None if v == "undefined" else _parse_num(v)) for k, v in r.items()}
                rows.append((r["run"], vals))
    Path(out_path).write_text(metrics_table(rows))
    return EXIT_OK


def _parse_num(v):
    try:
        return int(v)
    except ValueError:
        try:
            return float(v)
        except ValueError:
            return v


def build_parser():
    parser = argparse.ArgumentParser(
        prog="obesity-heuristic",
        description="Just-In-Time duplicate cleaning driven by clonal selection.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="run the cleaning loop from a JSON config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("generate", help="write a synthetic dirty dataset and truth pairs")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dup-rate", type=float, required=True)
    p.add_argument("--max-edits", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None, help="default: <out stem>.truth.csv")

    p = sub.add_parser("optimize", help="clonal selection on a benchmark function")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--dims", type=int, required=True)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--population-size", type=int, default=50)
    p.add_argument("--select-count", type=int, default=10)
    p.add_argument("--clone-factor", type=float, default=1.0)
    p.add_argument("--mutation-base", type=float, default=0.3)
    p.add_argument("--replace-count", type=int, default=5)

    p = sub.add_parser("report-merge", help="concatenate metric rows")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "clean":
            return command_clean(args.config)
        if args.command == "generate":
            return command_generate(
                args.n, args.dup_rate, args.max_edits, args.seed, args.out, args.truth_out
            )
        if args.command == "optimize":
            return command_optimize(
                args.benchmark, args.dims, args.generations, args.seed, args.out,
                population_size=args.population_size,
                select_count=args.select_count,
                clone_factor=args.clone_factor,
                mutation_base=args.mutation_base,
                replace_count=args.replace_count,
            )
        return command_report_merge(args.paths, args.out)
    except ObesityHeuristicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
