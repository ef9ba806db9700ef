"""Cohort comparison report tables.

Five machine-readable surfaces per run: enrollment/engagement counts,
categorical breakdown, first/final score comparison, retry-index
distribution per class, and weekly new/returning activity. All tables emit
counts and proportions so downstream plotting needs no recomputation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .classify import OrdinalClass
from .engagement import StudentAggregate
from .events import Event
from .sessions import DEFAULT_GAP, build_sessions, weekly_presence


@dataclass(frozen=True)
class CohortId:
    modality: str  # "on_campus" | "online"
    term_label: str

    @property
    def label(self) -> str:
        return f"{self.modality}:{self.term_label}"


@dataclass(frozen=True)
class EnrollmentRow:
    cohort: CohortId
    users: int
    user_events: int
    sessions: int


@dataclass(frozen=True)
class BreakdownRow:
    cohort: CohortId
    ordinal_class: OrdinalClass
    count: int
    proportion: float
    proportion_excluding_no_show: Optional[float]


@dataclass(frozen=True)
class ScoreStats:
    cohort: CohortId
    metric: str  # "first_score" | "final_score" | "score_r"
    group: str  # ordinal class name or "all"
    mean: Optional[float]
    variance: Optional[float]
    q1: Optional[float]
    median: Optional[float]
    q3: Optional[float]
    n: int


@dataclass(frozen=True)
class WeeklyRow:
    cohort: CohortId
    week_index: int
    new_users: int
    returning_users: int


def enrollment_table(
    events_by_cohort: Mapping[CohortId, Sequence[Event]],
    gap: timedelta = DEFAULT_GAP,
) -> list[EnrollmentRow]:
    rows = []
    for cohort in sorted(events_by_cohort, key=lambda c: c.label):
        events = events_by_cohort[cohort]
        by_user: dict[str, list[Event]] = {}
        for ev in events:
            by_user.setdefault(ev.user_id, []).append(ev)
        n_sessions = 0
        for user_id in sorted(by_user):
            user_events = sorted(by_user[user_id], key=lambda e: e.timestamp)
            n_sessions += len(build_sessions(user_events, gap))
        rows.append(
            EnrollmentRow(
                cohort=cohort,
                users=len(by_user),
                user_events=len(events),
                sessions=n_sessions,
            )
        )
    return rows


def categorical_breakdown(
    classes_by_cohort: Mapping[CohortId, Sequence[OrdinalClass]],
    exclude_no_show: bool = False,
) -> list[BreakdownRow]:
    """Counts and proportions per class per cohort.

    With ``exclude_no_show`` the no-show-free proportions are added for the
    other seven classes; both proportion columns each sum to 1 per cohort.
    """
    rows = []
    for cohort in sorted(classes_by_cohort, key=lambda c: c.label):
        classes = list(classes_by_cohort[cohort])
        total = len(classes)
        if total == 0:
            continue
        counts = {cls: 0 for cls in OrdinalClass}
        for cls in classes:
            counts[cls] += 1
        engaged_total = total - counts[OrdinalClass.NO_SHOW]
        for cls in OrdinalClass:
            excl: Optional[float] = None
            if exclude_no_show and cls is not OrdinalClass.NO_SHOW and engaged_total > 0:
                excl = counts[cls] / engaged_total
            rows.append(
                BreakdownRow(
                    cohort=cohort,
                    ordinal_class=cls,
                    count=counts[cls],
                    proportion=counts[cls] / total,
                    proportion_excluding_no_show=excl,
                )
            )
    return rows


def _stats(values: Sequence[float]) -> tuple:
    """(mean, population variance, q1, median, q3) with linear-interpolation
    quartiles."""
    arr = np.asarray(values, dtype=float)
    q1, median, q3 = np.percentile(arr, [25.0, 50.0, 75.0], method="linear")
    return (
        float(arr.mean()),
        float(arr.var()),
        float(q1),
        float(median),
        float(q3),
    )


def _stats_row(cohort: CohortId, metric: str, group: str, values: list[float]) -> ScoreStats:
    if not values:
        return ScoreStats(
            cohort=cohort, metric=metric, group=group,
            mean=None, variance=None, q1=None, median=None, q3=None, n=0,
        )
    mean, variance, q1, median, q3 = _stats(values)
    return ScoreStats(
        cohort=cohort, metric=metric, group=group,
        mean=mean, variance=variance, q1=q1, median=median, q3=q3, n=len(values),
    )


def score_comparison(
    aggregates_by_cohort: Mapping[CohortId, Sequence[StudentAggregate]],
) -> list[ScoreStats]:
    """Cohort-level stats over per-student mean first and final scores."""
    rows = []
    for cohort in sorted(aggregates_by_cohort, key=lambda c: c.label):
        aggs = aggregates_by_cohort[cohort]
        for metric, getter in (
            ("first_score", lambda a: a.mean_first_score),
            ("final_score", lambda a: a.mean_final_score),
        ):
            values = [getter(a) for a in aggs if getter(a) is not None]
            rows.append(_stats_row(cohort, metric, "all", values))
    return rows


def scorer_distribution(
    aggregates_by_cohort: Mapping[CohortId, Sequence[tuple[StudentAggregate, OrdinalClass]]],
) -> list[ScoreStats]:
    """Box-plot stats of mean retry index per (cohort, class); empty cells
    are omitted."""
    rows = []
    for cohort in sorted(aggregates_by_cohort, key=lambda c: c.label):
        pairs = aggregates_by_cohort[cohort]
        for cls in OrdinalClass:
            values = [
                agg.mean_score_r
                for agg, assigned in pairs
                if assigned is cls and agg.mean_score_r is not None
            ]
            if values:
                rows.append(_stats_row(cohort, "score_r", cls.value, values))
    return rows


def weekly_report(
    events_by_cohort: Mapping[CohortId, Sequence[Event]],
    anchors: Mapping[CohortId, date],
) -> tuple[list[WeeklyRow], dict]:
    """Weekly new/returning rows per cohort plus dropped-event counts."""
    rows = []
    dropped = {}
    for cohort in sorted(events_by_cohort, key=lambda c: c.label):
        presence = weekly_presence(events_by_cohort[cohort], anchors[cohort])
        dropped[cohort.label] = presence.dropped_before_anchor
        for week in presence.weeks:
            rows.append(
                WeeklyRow(
                    cohort=cohort,
                    week_index=week.week_index,
                    new_users=week.new_users,
                    returning_users=week.returning_users,
                )
            )
    return rows, dropped


# -- serialization ----------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    return value


def _row_dicts(rows: Iterable) -> tuple[list[str], list[dict]]:
    """Flatten report dataclass rows to (fieldnames, dicts) for output."""
    out = []
    fieldnames: list[str] = []
    for row in rows:
        if isinstance(row, EnrollmentRow):
            fieldnames = ["cohort", "users", "user_events", "sessions"]
            out.append(
                {
                    "cohort": row.cohort.label,
                    "users": row.users,
                    "user_events": row.user_events,
                    "sessions": row.sessions,
                }
            )
        elif isinstance(row, BreakdownRow):
            fieldnames = [
                "cohort", "class", "count", "proportion", "proportion_excluding_no_show",
            ]
            out.append(
                {
                    "cohort": row.cohort.label,
                    "class": row.ordinal_class.value,
                    "count": row.count,
                    "proportion": row.proportion,
                    "proportion_excluding_no_show": row.proportion_excluding_no_show,
                }
            )
        elif isinstance(row, ScoreStats):
            fieldnames = [
                "cohort", "metric", "group", "mean", "variance", "q1", "median", "q3", "n",
            ]
            out.append(
                {
                    "cohort": row.cohort.label,
                    "metric": row.metric,
                    "group": row.group,
                    "mean": row.mean,
                    "variance": row.variance,
                    "q1": row.q1,
                    "median": row.median,
                    "q3": row.q3,
                    "n": row.n,
                }
            )
        elif isinstance(row, WeeklyRow):
            fieldnames = ["cohort", "week_index", "new_users", "returning_users"]
            out.append(
                {
                    "cohort": row.cohort.label,
                    "week_index": row.week_index,
                    "new_users": row.new_users,
                    "returning_users": row.returning_users,
                }
            )
        else:
            raise TypeError(f"not a report row: {row!r}")
    return fieldnames, out


_HEADERS = {
    "enrollment": ["cohort", "users", "user_events", "sessions"],
    "breakdown": ["cohort", "class", "count", "proportion", "proportion_excluding_no_show"],
    "scores": ["cohort", "metric", "group", "mean", "variance", "q1", "median", "q3", "n"],
    "weekly": ["cohort", "week_index", "new_users", "returning_users"],
}


def write_report(
    path: Union[str, Path],
    rows: Sequence,
    fmt: str = "csv",
    kind: Optional[str] = None,
) -> None:
    """Write a report table as CSV (default) or JSON lines, UTF-8.

    ``kind`` supplies the header for empty tables, where the row type cannot
    be inferred.
    """
    fieldnames, dicts = _row_dicts(rows)
    if not fieldnames:
        fieldnames = _HEADERS.get(kind or "", [])
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            for row in dicts:
                writer.writerow({k: _cell(v) for k, v in row.items()})
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as handle:
            for row in dicts:
                handle.write(json.dumps(row, separators=(",", ":")) + "\n")
    else:
        raise ValueError(f"unknown format: {fmt!r}")
