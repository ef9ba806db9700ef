"""File-based pipeline orchestration: parse, aggregate, classify, report, mine.

Stages communicate via files so each is independently re-runnable. Given the
same inputs and flags every stage writes byte-identical outputs: parsing is
order-merged deterministically, aggregation state merges commutatively, and
all rows are emitted in sorted order.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence, Union

from .classify import CLASS_NAMES, OrdinalClass, RuleConfig, classify
from .engagement import (
    DEFAULT_PASSING_THRESHOLD,
    StudentAggregate,
    collect_student_events,
)
from .events import Event, ParseStats, iter_events
from .manifest import CourseManifest, load_manifest
from .patterns import (
    MiningResult,
    contrast_patterns,
    encode_sequences,
    mine,
    write_contrast_csv,
    write_patterns_csv,
)
from .reports import (
    CohortId,
    categorical_breakdown,
    enrollment_table,
    score_comparison,
    scorer_distribution,
    weekly_report,
    write_report,
)
from .sessions import DEFAULT_GAP


class InputError(Exception):
    """Anticipated bad input (config, paths, names); maps to exit code 2."""


@dataclass(frozen=True)
class CohortRule:
    pattern: str  # regex searched against course_id
    cohort: CohortId


@dataclass
class RunManifest:
    """Run configuration: cohort mapping, thresholds, session gap, anchors."""

    manifest: Optional[CourseManifest] = None
    rules: RuleConfig = field(default_factory=RuleConfig)
    passing_threshold: float = DEFAULT_PASSING_THRESHOLD
    gap: timedelta = DEFAULT_GAP
    cohorts: list[CohortRule] = field(default_factory=list)
    anchors: dict = field(default_factory=dict)  # cohort label -> date

    def __post_init__(self) -> None:
        if not self.cohorts:
            self.cohorts = [CohortRule(".*", CohortId("online", "all"))]


_RUN_KEYS = {"manifest", "cohorts", "rules", "passing_threshold", "gap_minutes", "anchors"}
_COHORT_KEYS = {"pattern", "modality", "term"}


def load_run_manifest(path: Union[str, Path]) -> RunManifest:
    """Load and validate a run config JSON file. Unknown keys are rejected
    and referenced paths must exist."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except ValueError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})")
    if not isinstance(obj, dict):
        raise InputError(f"{path}: run config must be a JSON object")
    unknown = set(obj) - _RUN_KEYS
    if unknown:
        raise InputError(f"{path}: unknown run config keys: {sorted(unknown)}")

    manifest = None
    if obj.get("manifest"):
        manifest_path = Path(obj["manifest"])
        if not manifest_path.is_absolute():
            manifest_path = path.parent / manifest_path
        if not manifest_path.exists():
            raise InputError(f"{path}: manifest not found: {manifest_path}")
        manifest = load_manifest(manifest_path)

    cohorts = []
    for i, entry in enumerate(obj.get("cohorts", [])):
        if not isinstance(entry, dict):
            raise InputError(f"{path}: cohorts[{i}] must be an object")
        unknown = set(entry) - _COHORT_KEYS
        if unknown:
            raise InputError(f"{path}: cohorts[{i}] unknown keys: {sorted(unknown)}")
        try:
            compiled = re.compile(entry["pattern"])
        except (KeyError, re.error) as exc:
            raise InputError(f"{path}: cohorts[{i}] bad pattern ({exc})")
        modality = entry.get("modality", "online")
        if modality not in ("on_campus", "online"):
            raise InputError(f"{path}: cohorts[{i}] modality must be on_campus or online")
        cohorts.append(
            CohortRule(compiled.pattern, CohortId(modality, str(entry.get("term", "all"))))
        )

    try:
        rules = RuleConfig.from_dict(obj.get("rules", {}))
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: bad rules ({exc})")

    anchors = {}
    for label, raw in (obj.get("anchors") or {}).items():
        try:
            anchors[label] = date.fromisoformat(raw)
        except (TypeError, ValueError):
            raise InputError(f"{path}: bad anchor date for {label!r}: {raw!r}")

    gap_minutes = obj.get("gap_minutes", 30)
    if not isinstance(gap_minutes, (int, float)) or gap_minutes <= 0:
        raise InputError(f"{path}: gap_minutes must be a positive number")
    passing = obj.get("passing_threshold", DEFAULT_PASSING_THRESHOLD)
    if not isinstance(passing, (int, float)) or not 0 < passing <= 1:
        raise InputError(f"{path}: passing_threshold must be in (0, 1]")

    return RunManifest(
        manifest=manifest,
        rules=rules,
        passing_threshold=float(passing),
        gap=timedelta(minutes=float(gap_minutes)),
        cohorts=cohorts,
        anchors=anchors,
    )


def parse_log_files(
    paths: Sequence[Union[str, Path]], workers: Optional[int] = None
) -> tuple[ParseStats, list[Event], list[tuple[str, ParseStats]]]:
    """Parse many files, merging results in input order regardless of the
    worker count. ``workers=None`` uses the available cores."""
    paths = [Path(p) for p in paths]
    for p in paths:
        if not p.exists():
            raise InputError(f"log file not found: {p}")
    if workers is None:
        workers = os.cpu_count() or 1

    def parse_one(p: Path) -> tuple[ParseStats, list[Event]]:
        stats = ParseStats()
        events = list(iter_events(p, stats))
        return stats, events

    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(parse_one, paths))
    else:
        results = [parse_one(p) for p in paths]

    total = ParseStats()
    events: list[Event] = []
    per_file = []
    for path, (stats, file_events) in zip(paths, results):
        total = total.merge(stats)
        events.extend(file_events)
        per_file.append((str(path), stats))
    return total, events, per_file


def validate_files(
    paths: Sequence[Union[str, Path]], workers: Optional[int] = None
) -> tuple[ParseStats, list[tuple[str, ParseStats]]]:
    """Streaming per-file parse tallies; events are discarded, not held."""
    paths = [Path(p) for p in paths]
    for p in paths:
        if not p.exists():
            raise InputError(f"log file not found: {p}")
    if workers is None:
        workers = os.cpu_count() or 1

    def tally_one(p: Path) -> ParseStats:
        stats = ParseStats()
        for _ in iter_events(p, stats):
            pass
        return stats

    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(tally_one, paths))
    else:
        results = [tally_one(p) for p in paths]

    total = ParseStats()
    per_file = []
    for path, stats in zip(paths, results):
        total = total.merge(stats)
        per_file.append((str(path), stats))
    return total, per_file


def assign_cohorts(
    events: Sequence[Event], cohorts: Sequence[CohortRule]
) -> tuple[dict, int]:
    """First-match cohort per course_id; unmatched events are dropped and
    counted."""
    compiled = [(re.compile(rule.pattern), rule.cohort) for rule in cohorts]
    cache: dict[str, Optional[CohortId]] = {}
    by_cohort: dict[CohortId, list[Event]] = {}
    unmatched = 0
    for ev in events:
        cohort = cache.get(ev.course_id, _UNSET)
        if cohort is _UNSET:
            cohort = next(
                (c for pattern, c in compiled if pattern.search(ev.course_id)), None
            )
            cache[ev.course_id] = cohort
        if cohort is None:
            unmatched += 1
        else:
            by_cohort.setdefault(cohort, []).append(ev)
    return by_cohort, unmatched


_UNSET = object()


def _year_from_label(label: str) -> Optional[int]:
    match = re.search(r"(19|20)\d{2}", label)
    return int(match.group(0)) if match else None


def resolve_anchor(
    cohort: CohortId, run: RunManifest, events: Sequence[Event]
) -> date:
    """Weekly anchor: explicit config, else course start for on-campus,
    else January 1 of the online instance year, else earliest event."""
    if cohort.label in run.anchors:
        return run.anchors[cohort.label]
    if cohort.modality == "on_campus" and run.manifest and run.manifest.course_start:
        return run.manifest.course_start
    if cohort.modality == "online":
        year = _year_from_label(cohort.term_label)
        if year is None and events:
            year = min(e.timestamp for e in events).year
        if year is not None:
            return date(year, 1, 1)
    if events:
        return min(e.timestamp for e in events).date()
    return date(1970, 1, 1)


@dataclass
class PipelineResult:
    out_dir: Path
    files: dict
    parse_stats: ParseStats
    per_file_stats: list
    unmatched_events: int
    aggregates: list  # (cohort, StudentAggregate, OrdinalClass)


def run_pipeline(
    run: RunManifest,
    log_paths: Sequence[Union[str, Path]],
    out_dir: Union[str, Path],
    fmt: str = "csv",
    workers: Optional[int] = None,
    exclude_no_show: bool = False,
) -> PipelineResult:
    """Full batch: validate/parse, aggregate, classify, emit all report tables."""
    # Inputs are read before any output exists, so a bad input writes nothing.
    total_stats, events, per_file = parse_log_files(log_paths, workers)
    by_cohort, unmatched = assign_cohorts(events, run.cohorts)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[CohortId, StudentAggregate, OrdinalClass]] = []
    classes_by_cohort: dict[CohortId, list[OrdinalClass]] = {}
    pairs_by_cohort: dict[CohortId, list] = {}
    for cohort in sorted(by_cohort, key=lambda c: c.label):
        states = collect_student_events(by_cohort[cohort])
        for key in sorted(states, key=lambda k: (k[1], k[0])):
            agg = states[key].finalize(run.manifest, run.passing_threshold)
            assigned = classify(agg, run.rules)
            rows.append((cohort, agg, assigned))
            classes_by_cohort.setdefault(cohort, []).append(assigned)
            pairs_by_cohort.setdefault(cohort, []).append((agg, assigned))

    rows.sort(key=lambda r: (r[1].course_instance, r[1].user_id))

    files = {}

    aggregates_path = out_dir / "aggregates.jsonl"
    with open(aggregates_path, "w", encoding="utf-8") as handle:
        for _, agg, _ in rows:
            handle.write(agg.to_json() + "\n")
    files["aggregates"] = aggregates_path

    classifications_path = out_dir / "classifications.csv"
    with open(classifications_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user_id", "course_id", "cohort", "class"])
        for cohort, agg, assigned in rows:
            writer.writerow([agg.user_id, agg.course_instance, cohort.label, assigned.value])
    files["classifications"] = classifications_path

    ext = "csv" if fmt == "csv" else "jsonl"
    anchors = {
        cohort: resolve_anchor(cohort, run, by_cohort[cohort]) for cohort in by_cohort
    }
    weekly_rows, weekly_dropped = weekly_report(by_cohort, anchors)
    report_tables = {
        "enrollment": (enrollment_table(by_cohort, run.gap), "enrollment"),
        "breakdown": (
            categorical_breakdown(classes_by_cohort, exclude_no_show=exclude_no_show),
            "breakdown",
        ),
        "score_comparison": (score_comparison(
            {c: [agg for agg, _ in pairs] for c, pairs in pairs_by_cohort.items()}
        ), "scores"),
        "scorer_distribution": (scorer_distribution(pairs_by_cohort), "scores"),
        "weekly": (weekly_rows, "weekly"),
    }
    for name, (table_rows, kind) in report_tables.items():
        table_path = out_dir / f"{name}.{ext}"
        write_report(table_path, table_rows, fmt=fmt, kind=kind)
        files[name] = table_path

    meta_path = out_dir / "run_meta.json"
    meta = {
        "parse_stats": total_stats.as_dict(),
        "per_file_stats": {name: stats.as_dict() for name, stats in per_file},
        "unmatched_events": unmatched,
        "weekly_dropped_before_anchor": weekly_dropped,
        "anchors": {c.label: d.isoformat() for c, d in sorted(anchors.items(), key=lambda x: x[0].label)},
        "config": {
            "passing_threshold": run.passing_threshold,
            "gap_minutes": run.gap.total_seconds() / 60,
            "exclude_no_show": exclude_no_show,
            "format": fmt,
        },
        "notes": {
            "score_comparison": "per-student mean first/final scores, not per-attempt pooling",
            "quartiles": "linear interpolation between closest ranks",
        },
    }
    with open(meta_path, "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True)
        handle.write("\n")
    files["run_meta"] = meta_path

    return PipelineResult(
        out_dir=out_dir,
        files=files,
        parse_stats=total_stats,
        per_file_stats=per_file,
        unmatched_events=unmatched,
        aggregates=rows,
    )


def read_classifications(path: Union[str, Path]) -> dict[str, str]:
    """user_id -> class name from a pipeline classifications.csv."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"classifications file not found: {path}")
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            out[row["user_id"]] = row["class"]
    return out


def resolve_min_support(spec: float, n_sequences: int) -> int:
    """Absolute count, or a fraction of the database when spec < 1."""
    if spec >= 1:
        return int(spec)
    return max(1, math.ceil(spec * n_sequences))


def run_mining(
    run: RunManifest,
    log_paths: Sequence[Union[str, Path]],
    classifications_path: Union[str, Path],
    out_dir: Union[str, Path],
    class_names: Optional[Sequence[str]] = None,
    min_support: float = 0.05,
    max_len: int = 6,
    granularity: str = "per_session",
    split_check_outcome: bool = False,
    collapse_runs: bool = False,
    workers: Optional[int] = None,
) -> dict:
    """Per-class pattern tables plus the cross-class contrast table."""
    if class_names:
        unknown = [n for n in class_names if n not in CLASS_NAMES]
        if unknown:
            raise InputError(
                f"unknown class name(s) {unknown}; valid names: {', '.join(CLASS_NAMES)}"
            )
        selected = list(class_names)
    else:
        selected = list(CLASS_NAMES)

    user_classes = read_classifications(classifications_path)
    _, events, _ = parse_log_files(log_paths, workers)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = {
        "min_support": min_support,
        "max_len": max_len,
        "granularity": granularity,
        "split_check_outcome": split_check_outcome,
        "collapse_runs": collapse_runs,
    }

    files = {}
    results: dict[str, MiningResult] = {}
    alphabet = None
    for name in selected:
        class_events = [ev for ev in events if user_classes.get(ev.user_id) == name]
        sequences, alphabet = encode_sequences(
            class_events,
            granularity=granularity,
            split_check_outcome=split_check_outcome,
            passing_threshold=run.passing_threshold,
            gap=run.gap,
            collapse_runs=collapse_runs,
        )
        support = resolve_min_support(min_support, len(sequences))
        result = mine(sequences, support, max_len, params=params)
        results[name] = result
        table_path = out_dir / f"patterns_{name}.csv"
        write_patterns_csv(table_path, result, alphabet, class_name=name)
        files[f"patterns_{name}"] = table_path

    if len(results) > 1 and alphabet is not None:
        contrast_path = out_dir / "contrast.csv"
        write_contrast_csv(contrast_path, contrast_patterns(results), alphabet)
        files["contrast"] = contrast_path
    return files
