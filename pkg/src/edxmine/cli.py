"""Command-line entry point.

Subcommands: validate, pipeline, mine, synth. Exit codes: 0 success,
1 usage error, 2 input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from datetime import timedelta
from pathlib import Path
from typing import Optional

from .engagement import DEFAULT_PASSING_THRESHOLD
from .events import ParseStats
from .manifest import ManifestError, load_manifest
from .pipeline import (
    InputError,
    RunManifest,
    load_run_manifest,
    run_mining,
    run_pipeline,
    validate_files,
)
from .synth import AmbiguousPersonaError, generate_corpus, load_corpus_spec, write_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2 for
    # input errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _stats_line(label: str, stats: ParseStats) -> str:
    return (
        f"{label}: lines_read={stats.lines_read} parsed={stats.parsed} "
        f"retained={stats.retained} malformed={stats.malformed} "
        f"filtered_out={stats.filtered_out}"
    )


def cmd_validate(args) -> int:
    total, per_file = validate_files(args.logs, workers=args.workers)
    for name, stats in per_file:
        print(_stats_line(name, stats))
    print(_stats_line("TOTAL", total))
    return EXIT_OK


def _load_run(args) -> RunManifest:
    if args.run_config:
        run = load_run_manifest(args.run_config)
    else:
        manifest = load_manifest(args.manifest) if args.manifest else None
        run = RunManifest(manifest=manifest)
    if getattr(args, "gap_minutes", None) is not None:
        run.gap = timedelta(minutes=args.gap_minutes)
    if getattr(args, "passing_threshold", None) is not None:
        run.passing_threshold = args.passing_threshold
    return run


def cmd_pipeline(args) -> int:
    run = _load_run(args)
    result = run_pipeline(
        run,
        args.logs,
        args.out,
        fmt=args.format,
        workers=args.workers,
        exclude_no_show=args.exclude_no_show,
    )
    print(_stats_line("parsed", result.parse_stats))
    if result.unmatched_events:
        print(f"unmatched events (no cohort pattern): {result.unmatched_events}")
    for name in sorted(result.files):
        print(f"wrote {result.files[name]}")
    return EXIT_OK


def cmd_mine(args) -> int:
    run = _load_run(args)
    class_names: Optional[list[str]] = None
    if args.classes:
        class_names = [c.strip() for c in args.classes.split(",") if c.strip()]
    files = run_mining(
        run,
        args.logs,
        Path(args.out) / "classifications.csv",
        args.out,
        class_names=class_names,
        min_support=args.min_support,
        max_len=args.max_len,
        granularity="per_user" if args.per_user else "per_session",
        split_check_outcome=args.split_check_outcome,
        collapse_runs=args.collapse_runs,
        workers=args.workers,
    )
    for name in sorted(files):
        print(f"wrote {files[name]}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = load_corpus_spec(args.spec)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    corpus = generate_corpus(spec)
    events_path, labels_path = write_corpus(corpus, args.out)
    print(f"wrote {events_path} ({len(corpus.lines)} events)")
    print(f"wrote {labels_path} ({len(corpus.labels)} users)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="edxmine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--workers", type=int, default=None,
                       help="parallel parse workers (default: cores)")

    p_validate = sub.add_parser("validate", help="parse logs and report line tallies")
    p_validate.add_argument("logs", nargs="+", help="log files (.log or .gz)")
    add_common(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_pipeline = sub.add_parser(
        "pipeline", help="aggregate, classify, and emit all report tables"
    )
    p_pipeline.add_argument("logs", nargs="+")
    p_pipeline.add_argument("--run-config", help="run config JSON")
    p_pipeline.add_argument("--manifest", help="course manifest JSON (when no run config)")
    p_pipeline.add_argument("--out", required=True, help="output directory")
    p_pipeline.add_argument("--gap-minutes", type=float, default=None,
                            help="session inactivity gap (default 30)")
    p_pipeline.add_argument("--passing-threshold", type=float, default=None,
                            help=f"passing score ratio (default {DEFAULT_PASSING_THRESHOLD})")
    p_pipeline.add_argument("--exclude-no-show", action="store_true",
                            help="add no-show-excluded proportions to the breakdown")
    p_pipeline.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    add_common(p_pipeline)
    p_pipeline.set_defaults(func=cmd_pipeline)

    p_mine = sub.add_parser("mine", help="mine frequent event sequences per class")
    p_mine.add_argument("logs", nargs="+")
    p_mine.add_argument("--out", required=True,
                        help="pipeline output directory (needs classifications.csv)")
    p_mine.add_argument("--run-config", help="run config JSON")
    p_mine.add_argument("--manifest", help="course manifest JSON (when no run config)")
    p_mine.add_argument("--class", dest="classes", default=None,
                        help="comma-separated class names (default: all)")
    p_mine.add_argument("--min-support", type=float, default=0.05,
                        help="absolute count, or fraction of sequences when < 1")
    p_mine.add_argument("--max-len", type=int, default=6)
    gran = p_mine.add_mutually_exclusive_group()
    gran.add_argument("--per-session", dest="per_user", action="store_false",
                      help="one sequence per session (default)")
    gran.add_argument("--per-user", dest="per_user", action="store_true",
                      help="one sequence per user")
    p_mine.set_defaults(per_user=False)
    p_mine.add_argument("--split-check-outcome", action="store_true",
                        help="split problem checks into pass/fail symbols")
    p_mine.add_argument("--collapse-runs", action="store_true",
                        help="collapse consecutive duplicate symbols")
    p_mine.add_argument("--gap-minutes", type=float, default=None)
    p_mine.add_argument("--passing-threshold", type=float, default=None)
    add_common(p_mine)
    p_mine.set_defaults(func=cmd_mine)

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p_synth.add_argument("--spec", required=True, help="corpus spec JSON")
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ManifestError, AmbiguousPersonaError) as exc:
        print(f"edxmine: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"edxmine: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
