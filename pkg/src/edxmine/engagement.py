"""Per-student engagement reconstruction.

Rebuilds watched-interval unions per video, attempt histories per problem,
the 1-4 retry-difficulty index per problem, and the per-student aggregate
consumed by the classifier. Aggregation state merges commutatively across
arbitrary event shards: partial states hold raw event lists and all
order-sensitive work happens in a deterministic finalize step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional, Sequence

import json

from .events import (
    Event,
    EventType,
    ProblemPayload,
    VideoPayload,
    event_to_json,
)
from .manifest import CourseManifest

DEFAULT_PASSING_THRESHOLD = 0.7

#: Attempt-bearing event types. ``problem_graded`` can be opted in where a
#: corpus is known to emit it for real submissions.
ATTEMPT_TYPES = frozenset({EventType.PROBLEM_CHECK, EventType.PROBLEM_CHECK_FAIL})


class NoAttemptsError(ValueError):
    """Retry index is undefined for a problem record with zero attempts."""


@dataclass(frozen=True)
class WatchRecord:
    user_id: str
    video_id: str
    intervals: tuple[tuple[float, float], ...]
    duration: Optional[float]
    watch_fraction: Optional[float]

    @property
    def watched_seconds(self) -> float:
        return sum(end - start for start, end in self.intervals)


@dataclass(frozen=True)
class ProblemRecord:
    user_id: str
    problem_id: str
    attempts: tuple[tuple[datetime, Optional[float]], ...]
    first_score: Optional[float]
    final_score: Optional[float]
    n_attempts: int
    score_r: Optional[int]


@dataclass(frozen=True)
class StudentAggregate:
    user_id: str
    course_instance: str
    n_videos: int = 0
    n_problems: int = 0
    total_attempts: int = 0
    mean_attempts_per_problem: Optional[float] = None
    mean_watch_fraction: Optional[float] = None
    mean_score_r: Optional[float] = None
    mean_first_score: Optional[float] = None
    mean_final_score: Optional[float] = None
    order_fraction: Optional[float] = None

    def to_dict(self) -> dict:
        """Field-ordered dict with absent optionals omitted."""
        out: dict = {}
        for name in _AGGREGATE_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, obj: dict) -> "StudentAggregate":
        return cls(**{k: obj.get(k) for k in _AGGREGATE_FIELDS if k in obj})


_AGGREGATE_FIELDS = (
    "user_id",
    "course_instance",
    "n_videos",
    "n_problems",
    "total_attempts",
    "mean_attempts_per_problem",
    "mean_watch_fraction",
    "mean_score_r",
    "mean_first_score",
    "mean_final_score",
    "order_fraction",
)


def union_intervals(spans: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Union of [start, end) spans: disjoint, sorted, touching spans merged."""
    valid = sorted((s, e) for s, e in spans if s < e)
    merged: list[tuple[float, float]] = []
    for start, end in valid:
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def _current_time(ev: Event) -> Optional[float]:
    payload = ev.payload
    if isinstance(payload, VideoPayload):
        return payload.current_time
    return None


def reconstruct_intervals(events: Sequence[Event]) -> WatchRecord:
    """Watched-content intervals for one (user, video) event stream.

    A play opens an interval; the next play/pause/stop/seek/complete closes
    it (pause and stop at their playhead, seek at its pre-seek position,
    complete at the video duration, a second play at its own position).
    Transcript, load, and speed events never move the playhead. An unclosed
    trailing play contributes nothing. Duration comes from the first event
    carrying one; intervals are clamped to [0, duration] when it is known.
    """
    user_id = events[0].user_id if events else ""
    video_id = ""
    duration: Optional[float] = None
    spans: list[tuple[float, float]] = []
    open_pos: Optional[float] = None
    last_pos = 0.0

    for ev in events:
        payload = ev.payload
        if isinstance(payload, VideoPayload):
            if not video_id:
                video_id = payload.video_id
            if duration is None and payload.duration is not None:
                duration = payload.duration
        etype = ev.event_type

        if etype is EventType.PLAY_VIDEO:
            pos = _current_time(ev)
            if pos is None:
                pos = last_pos
            if open_pos is not None:
                spans.append((open_pos, pos))
            open_pos = pos
            last_pos = pos
        elif etype in (EventType.PAUSE_VIDEO, EventType.STOP_VIDEO):
            pos = _current_time(ev)
            if pos is None:
                pos = last_pos
            if open_pos is not None:
                spans.append((open_pos, pos))
                open_pos = None
            last_pos = pos
        elif etype is EventType.SEEK_VIDEO:
            old = payload.old_time if isinstance(payload, VideoPayload) else None
            new = payload.new_time if isinstance(payload, VideoPayload) else None
            close_at = old if old is not None else last_pos
            if open_pos is not None:
                spans.append((open_pos, close_at))
                open_pos = None
            last_pos = new if new is not None else close_at
        elif etype is EventType.COMPLETE_VIDEO:
            close_at = duration
            if close_at is None:
                close_at = _current_time(ev)
            if close_at is None:
                close_at = last_pos
            if open_pos is not None:
                spans.append((open_pos, close_at))
                open_pos = None
            last_pos = close_at
        # load_video / hide_transcript / speed_change: playhead unaffected

    if duration is not None:
        spans = [(max(0.0, min(s, duration)), max(0.0, min(e, duration))) for s, e in spans]
    else:
        spans = [(max(0.0, s), max(0.0, e)) for s, e in spans]
    intervals = tuple(union_intervals(spans))

    watch_fraction: Optional[float] = None
    if duration is not None and duration > 0:
        watched = sum(end - start for start, end in intervals)
        watch_fraction = min(1.0, watched / duration)

    return WatchRecord(
        user_id=user_id,
        video_id=video_id,
        intervals=intervals,
        duration=duration,
        watch_fraction=watch_fraction,
    )


def _score_r_value(n_attempts: int, final_score: Optional[float], passing: float) -> int:
    if final_score is None or final_score < passing:
        return 4
    if n_attempts < 2:
        return 1
    if n_attempts < 3:
        return 2
    if n_attempts < 5:
        return 3
    return 4


def score_r(
    record: ProblemRecord, passing_threshold: float = DEFAULT_PASSING_THRESHOLD
) -> int:
    """Retry-difficulty index in {1,2,3,4}; higher means more struggle.

    Passing finals map attempt counts 1/2/3-4/5+ to 1/2/3/4; a non-passing
    (or unscored) final is always 4.
    """
    if record.n_attempts < 1:
        raise NoAttemptsError(f"problem {record.problem_id!r} has no attempts")
    return _score_r_value(record.n_attempts, record.final_score, passing_threshold)


def problem_history(
    events: Sequence[Event],
    passing_threshold: float = DEFAULT_PASSING_THRESHOLD,
    count_problem_graded: bool = False,
) -> ProblemRecord:
    """Attempt history for one (user, problem) event stream.

    Checks and failed checks count as attempts; a failed check without grade
    fields scores 0. Showing a problem or an answer is not an attempt.
    """
    attempt_types = ATTEMPT_TYPES
    if count_problem_graded:
        attempt_types = attempt_types | {EventType.PROBLEM_GRADED}

    user_id = events[0].user_id if events else ""
    problem_id = ""
    attempts: list[tuple[datetime, Optional[float]]] = []
    for ev in events:
        payload = ev.payload
        if isinstance(payload, ProblemPayload) and not problem_id:
            problem_id = payload.problem_id
        if ev.event_type not in attempt_types:
            continue
        score: Optional[float] = None
        if (
            isinstance(payload, ProblemPayload)
            and payload.grade is not None
            and payload.max_grade
        ):
            score = payload.grade / payload.max_grade
        elif ev.event_type is EventType.PROBLEM_CHECK_FAIL:
            score = 0.0
        attempts.append((ev.timestamp, score))

    scored = [s for _, s in attempts if s is not None]
    first_score = scored[0] if scored else None
    final_score = scored[-1] if scored else None
    n_attempts = len(attempts)
    return ProblemRecord(
        user_id=user_id,
        problem_id=problem_id,
        attempts=tuple(attempts),
        first_score=first_score,
        final_score=final_score,
        n_attempts=n_attempts,
        score_r=_score_r_value(n_attempts, final_score, passing_threshold)
        if n_attempts
        else None,
    )


def _event_order_key(ev: Event) -> tuple:
    # Total order so that identical event multisets finalize identically
    # no matter how shards were merged.
    return (ev.timestamp, event_to_json(ev))


@dataclass
class StudentEvents:
    """Mergeable per-(user, course) bucket of content events."""

    user_id: str
    course_id: str
    video_events: dict[str, list[Event]] = field(default_factory=dict)
    problem_events: dict[str, list[Event]] = field(default_factory=dict)

    def add(self, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, VideoPayload):
            self.video_events.setdefault(payload.video_id, []).append(event)
        elif isinstance(payload, ProblemPayload):
            self.problem_events.setdefault(payload.problem_id, []).append(event)

    def merge(self, other: "StudentEvents") -> None:
        for vid, evs in other.video_events.items():
            self.video_events.setdefault(vid, []).extend(evs)
        for pid, evs in other.problem_events.items():
            self.problem_events.setdefault(pid, []).extend(evs)

    def finalize(
        self,
        manifest: Optional[CourseManifest] = None,
        passing_threshold: float = DEFAULT_PASSING_THRESHOLD,
        count_problem_graded: bool = False,
    ) -> StudentAggregate:
        """Reduce buffered events to the per-student aggregate.

        Deterministic: events are sorted by a total order and content ids
        are visited sorted, so merge order never changes the output.
        """
        watch_records: dict[str, WatchRecord] = {}
        for vid in sorted(self.video_events):
            evs = sorted(self.video_events[vid], key=_event_order_key)
            watch_records[vid] = reconstruct_intervals(evs)

        problem_records: dict[str, ProblemRecord] = {}
        for pid in sorted(self.problem_events):
            evs = sorted(self.problem_events[pid], key=_event_order_key)
            problem_records[pid] = problem_history(
                evs, passing_threshold, count_problem_graded
            )

        n_videos = sum(
            1
            for vid, evs in sorted(self.video_events.items())
            if any(e.event_type is EventType.PLAY_VIDEO for e in evs)
        )
        attempted = {
            pid: rec for pid, rec in problem_records.items() if rec.n_attempts > 0
        }
        n_problems = len(attempted)
        total_attempts = sum(rec.n_attempts for rec in attempted.values())

        fractions = [
            rec.watch_fraction
            for _, rec in sorted(watch_records.items())
            if rec.watch_fraction is not None
        ]
        score_rs = [rec.score_r for _, rec in sorted(attempted.items())]
        firsts = [
            rec.first_score
            for _, rec in sorted(attempted.items())
            if rec.first_score is not None
        ]
        finals = [
            rec.final_score
            for _, rec in sorted(attempted.items())
            if rec.final_score is not None
        ]

        return StudentAggregate(
            user_id=self.user_id,
            course_instance=self.course_id,
            n_videos=n_videos,
            n_problems=n_problems,
            total_attempts=total_attempts,
            mean_attempts_per_problem=total_attempts / n_problems if n_problems else None,
            mean_watch_fraction=sum(fractions) / len(fractions) if fractions else None,
            mean_score_r=sum(score_rs) / len(score_rs) if score_rs else None,
            mean_first_score=sum(firsts) / len(firsts) if firsts else None,
            mean_final_score=sum(finals) / len(finals) if finals else None,
            order_fraction=self._order_fraction(manifest, attempted),
        )

    def _order_fraction(
        self,
        manifest: Optional[CourseManifest],
        attempted: dict[str, ProblemRecord],
    ) -> Optional[float]:
        """Share of placeable attempted problems first tried after a video
        play in the same manifest section."""
        if manifest is None or not attempted:
            return None
        earliest_play: dict[tuple[int, int, int], datetime] = {}
        for vid, evs in self.video_events.items():
            section = manifest.section_of(vid)
            if section is None:
                continue
            plays = [e.timestamp for e in evs if e.event_type is EventType.PLAY_VIDEO]
            if not plays:
                continue
            first = min(plays)
            if section not in earliest_play or first < earliest_play[section]:
                earliest_play[section] = first

        evaluable = 0
        studied_first = 0
        for pid, rec in sorted(attempted.items()):
            section = manifest.section_of(pid)
            if section is None or not manifest.section_has_video(section):
                continue
            evaluable += 1
            first_attempt = rec.attempts[0][0]
            play_ts = earliest_play.get(section)
            if play_ts is not None and play_ts < first_attempt:
                studied_first += 1
        if evaluable == 0:
            return None
        return studied_first / evaluable


StudentKey = tuple[str, str]


def collect_student_events(events: Iterable[Event]) -> dict[StudentKey, StudentEvents]:
    """Bucket a shard of events into per-(user, course) mergeable states."""
    states: dict[StudentKey, StudentEvents] = {}
    for ev in events:
        key = (ev.user_id, ev.course_id)
        state = states.get(key)
        if state is None:
            state = states[key] = StudentEvents(user_id=ev.user_id, course_id=ev.course_id)
        state.add(ev)
    return states


def merge_student_events(
    into: dict[StudentKey, StudentEvents], other: dict[StudentKey, StudentEvents]
) -> dict[StudentKey, StudentEvents]:
    """Fold ``other`` into ``into`` (in place) and return it."""
    for key, state in other.items():
        existing = into.get(key)
        if existing is None:
            into[key] = state
        else:
            existing.merge(state)
    return into


def aggregate_student(
    events: Iterable[Event],
    manifest: Optional[CourseManifest] = None,
    passing_threshold: float = DEFAULT_PASSING_THRESHOLD,
    count_problem_graded: bool = False,
    user_id: str = "",
    course_id: str = "",
) -> StudentAggregate:
    """Aggregate one student's events (any order) into their metrics row."""
    state = StudentEvents(user_id=user_id, course_id=course_id)
    for ev in events:
        if not state.user_id:
            state.user_id = ev.user_id
            state.course_id = ev.course_id
        state.add(ev)
    return state.finalize(manifest, passing_threshold, count_problem_graded)


def aggregate_corpus(
    events: Iterable[Event],
    manifest: Optional[CourseManifest] = None,
    passing_threshold: float = DEFAULT_PASSING_THRESHOLD,
    count_problem_graded: bool = False,
) -> list[StudentAggregate]:
    """Aggregate a whole corpus; rows sorted by (course, user)."""
    states = collect_student_events(events)
    return [
        states[key].finalize(manifest, passing_threshold, count_problem_graded)
        for key in sorted(states, key=lambda k: (k[1], k[0]))
    ]
