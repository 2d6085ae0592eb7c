"""Command-line entry points.

Exit codes: 0 success, 1 runtime or backend failure, 2 invalid input or
configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import io
from .config import RunConfig
from .diagnostics import diagnose_all
from .errors import CheckpointError, ConfigError, InputError, RubricError
from .pipeline import run_extraction
from .refinement import judge
from .selection import greedy_select

logger = logging.getLogger("rubriclearn")

EXIT_OK, EXIT_RUNTIME, EXIT_INPUT = 0, 1, 2


def bundled_dataset_path() -> Path:
    """Six-pair synthetic dataset shipped with the package."""
    return Path(str(resources.files("rubriclearn").joinpath("data").joinpath("synthetic_pairs.jsonl")))


def _config(args) -> RunConfig:
    return RunConfig.load(args.config, args.set or ())


def _require_file(path: Optional[str], what: str) -> Path:
    if not path:
        raise InputError(f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    return p


def cmd_extract(args) -> int:
    cfg = _config(args)
    dataset_path = args.dataset or cfg["paths.dataset"]
    if dataset_path == "bundled":
        dataset_path = str(bundled_dataset_path())
    pairs = io.load_pairs(_require_file(dataset_path, "dataset"))
    out = Path(args.output or cfg["paths.output_dir"])
    checkpoint = args.checkpoint or cfg["paths.checkpoint"] or str(out / "checkpoint.json")
    if args.resume and not Path(checkpoint).is_file():
        raise InputError(f"--resume given but no checkpoint at {checkpoint}")

    result = run_extraction(
        pairs, cfg.pipeline(), cfg.chat_backend(), cfg.embed_backend(), checkpoint_path=checkpoint, resume=args.resume
    )
    io.save_pool(result.pool, out / "pool.jsonl")
    io.save_core(result.core, out / "core.json", result.pool, result.batch_gain_history)
    io.save_theme_tips(result.structured, out / "rubrics.json")
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "kind": "run_report",
        "stop_reason": result.stop_reason,
        "batch_iterations": result.batch_iterations,
        "pairs_processed": result.pairs_processed,
        "pool_size": result.pool_size,
        "core_size": len(result.core.rubric_ids),
        "core_coding_rate": result.core.coding_rate,
        "batch_gain_history": result.batch_gain_history,
        "outcomes": result.outcomes,
        "config": cfg.to_dict(),
    }
    io.atomic_write_text(out / "run_report.json", json.dumps(report, indent=2, ensure_ascii=False) + "\n")
    print(
        f"{result.stop_reason}: {result.batch_iterations} batches, {result.pairs_processed} pairs, "
        f"pool {result.pool_size}, core {len(result.core.rubric_ids)}, themes {len(result.structured.themes)} -> {out}"
    )
    return EXIT_OK


def cmd_select(args) -> int:
    cfg = _config(args)
    if args.epsilon is not None:
        cfg.values["selection.epsilon"] = args.epsilon
    pool = io.load_pool(_require_file(args.pool, "pool"))
    if not pool:
        raise InputError(f"pool {args.pool} is empty")
    missing = [r for r in pool if r.embedding is None]
    if missing:
        vecs = cfg.embed_backend().embed([r.text for r in missing])
        for r, v in zip(missing, vecs):
            r.embedding = v
    core = greedy_select(pool, cfg.selection())
    out = Path(args.output)
    io.save_core(core, out, pool)
    print(f"{len(core.rubric_ids)} rubrics selected ({core.trace.stop_reason}) -> {out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _config(args)
    rubrics = io.load_rubric_set(_require_file(args.rubrics, "rubrics file"))
    test = io.load_pairs(_require_file(args.testset, "test set"))
    report = diagnose_all(rubrics, test, cfg.voting(), cfg.chat_backend("judge"), cfg["pipeline.parallelism"])
    out = Path(args.output_dir)
    table = report.table()
    io.atomic_write_text(out / "diagnostics.txt", table + "\n")
    io.atomic_write_text(out / "diagnostics.json", json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n")
    print(table)
    return EXIT_OK


def cmd_judge(args) -> int:
    cfg = _config(args)
    rubrics = io.load_rubric_set(_require_file(args.rubrics, "rubrics file"))
    verdict = judge(args.query, args.response_a, args.response_b, rubrics, cfg.chat_backend("judge")).verdict
    print(verdict)
    return EXIT_OK


def cmd_export_trace(args) -> int:
    core_path = _require_file(args.core, "core file")
    trace = Path(args.output or core_path.with_name("trace.csv"))
    batch = Path(args.batch_output or trace.with_name("batch_gains.csv"))
    io.export_trace(core_path, trace, batch)
    print(f"wrote {trace} and {batch}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rubriclearn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="YAML/JSON config file (defaults are built in)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. selection.tau_min=0.001")
        return p

    p = with_config(sub.add_parser("extract", help="run the batch-iterative extraction"))
    p.add_argument("--dataset", help="JSONL preference pairs ('bundled' for the synthetic sample)")
    p.add_argument("--output", help="output directory")
    p.add_argument("--checkpoint", help="checkpoint path (default: OUTPUT/checkpoint.json)")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint")
    p.set_defaults(func=cmd_extract)

    p = with_config(sub.add_parser("select", help="select a core set from a saved pool"))
    p.add_argument("--pool", required=True)
    p.add_argument("--output", default="core.json")
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_select)

    p = with_config(sub.add_parser("diagnose", help="coverage / precision / contribution report"))
    p.add_argument("--rubrics", required=True)
    p.add_argument("--testset", required=True)
    p.add_argument("--output-dir", default=".")
    p.set_defaults(func=cmd_diagnose)

    p = with_config(sub.add_parser("judge", help="judge one pair under a rubric set"))
    p.add_argument("--rubrics", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--response-a", required=True)
    p.add_argument("--response-b", required=True)
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("export-trace", help="write selection and batch-gain traces as CSV")
    p.add_argument("--core", required=True)
    p.add_argument("--output", help="trace CSV (default: trace.csv next to the core file)")
    p.add_argument("--batch-output", help="batch gain CSV (default: batch_gains.csv)")
    p.set_defaults(func=cmd_export_trace)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InputError, ConfigError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RubricError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
