from __future__ import annotations

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from edxmine.events import (
    Event,
    EventSource,
    EventType,
    ProblemPayload,
    VideoPayload,
    classify_event_type,
)
from edxmine.manifest import Block, BlockKind, Chapter, CourseManifest, Section, SubModule

T0 = datetime(2021, 8, 26, 0, 46, 55, 696000, tzinfo=timezone.utc)


def at(seconds: float = 0.0) -> datetime:
    return T0 + timedelta(seconds=seconds)


def video_event(
    name: str,
    video: str = "v1",
    t: float = 0.0,
    user: str = "u1",
    course: str = "c1",
    session: str | None = None,
    duration: float | None = None,
    current_time: float | None = None,
    old_time: float | None = None,
    new_time: float | None = None,
) -> Event:
    etype = classify_event_type(name)
    return Event(
        user_id=user,
        course_id=course,
        org_id="ORG",
        session_id=session,
        timestamp=at(t),
        event_type=etype,
        source=EventSource.BROWSER,
        payload=VideoPayload(
            video_id=video,
            duration=duration,
            current_time=current_time,
            old_time=old_time if etype is EventType.SEEK_VIDEO else None,
            new_time=new_time if etype is EventType.SEEK_VIDEO else None,
        ),
    )


def problem_event(
    name: str,
    problem: str = "p1",
    t: float = 0.0,
    user: str = "u1",
    course: str = "c1",
    session: str | None = None,
    grade: float | None = None,
    max_grade: float | None = None,
) -> Event:
    return Event(
        user_id=user,
        course_id=course,
        org_id="ORG",
        session_id=session,
        timestamp=at(t),
        event_type=classify_event_type(name),
        source=EventSource.BROWSER,
        payload=ProblemPayload(problem_id=problem, grade=grade, max_grade=max_grade),
    )


def bare_event(
    name: str,
    t: float = 0.0,
    user: str = "u1",
    course: str = "c1",
    session: str | None = None,
) -> Event:
    return Event(
        user_id=user,
        course_id=course,
        org_id="ORG",
        session_id=session,
        timestamp=at(t),
        event_type=classify_event_type(name),
        source=EventSource.BROWSER,
        payload=None,
    )


def raw_line(
    name: str = "play_video",
    user: str | int = 39071876,
    course: str = "course-v1:GTX+CS1301+1T2021a",
    org: str = "GTX",
    session: str | None = "c8789c2a8eed52a5924f5d6c4c234ea2",
    source: str = "browser",
    time: str = "2021-08-26T00:46:55.696Z",
    event: dict | str | None = None,
    **extra,
) -> str:
    """Build an edX-shaped raw log line."""
    record: dict = {
        "name": name,
        "event_type": name,
        "event_source": source,
        "context": {"user_id": user, "course_id": course, "org_id": org},
        "time": time,
    }
    if session is not None:
        record["session"] = session
    if event is not None:
        record["event"] = event
    record.update(extra)
    return json.dumps(record)


def _numbered_blocks(prefix: str, kind: BlockKind, count: int) -> list[Block]:
    return [Block(f"{prefix}-{i}", kind) for i in range(count)]


@pytest.fixture
def content_table_manifest() -> CourseManifest:
    """Four sub-modules with the reference per-kind block counts."""
    rows = [
        ("Fundamentals", 160, 56, 54, 67),
        ("Control Structures", 122, 85, 77, 85),
        ("Data Structures", 117, 58, 44, 111),
        ("Objects and Algorithms", 43, 17, 60, 32),
    ]
    submodules = []
    for si, (name, videos, ungraded, coding, graded) in enumerate(rows):
        blocks = (
            _numbered_blocks(f"s{si}-v", BlockKind.VIDEO, videos)
            + _numbered_blocks(f"s{si}-u", BlockKind.UNGRADED_EXERCISE, ungraded)
            + _numbered_blocks(f"s{si}-c", BlockKind.CODING_EXERCISE, coding)
            + _numbered_blocks(f"s{si}-g", BlockKind.GRADED_PROBLEM, graded)
        )
        submodules.append(
            SubModule(
                name=name,
                chapters=(
                    Chapter(name="all", sections=(Section(name="all", blocks=tuple(blocks)),)),
                ),
            )
        )
    return CourseManifest(course_id="c1", course_start=None, submodules=tuple(submodules))


def random_manifest(rng: random.Random) -> CourseManifest:
    counter = 0
    submodules = []
    for si in range(rng.randint(1, 3)):
        chapters = []
        for ci in range(rng.randint(1, 3)):
            sections = []
            for ei in range(rng.randint(1, 3)):
                blocks = []
                for _ in range(rng.randint(0, 5)):
                    kind = rng.choice(list(BlockKind))
                    blocks.append(Block(f"b{counter}", kind))
                    counter += 1
                sections.append(Section(name=f"s{ei}", blocks=tuple(blocks)))
            chapters.append(Chapter(name=f"c{ci}", sections=tuple(sections)))
        submodules.append(SubModule(name=f"m{si}", chapters=tuple(chapters)))
    return CourseManifest(course_id="rand", course_start=None, submodules=tuple(submodules))


def random_video_events(rng: random.Random, video: str = "v1") -> list[Event]:
    """Random play/pause/seek/stop/complete stream with millisecond-aligned
    positions and the duration on the first event."""
    duration = round(rng.uniform(10.0, 600.0), 3)

    def pos() -> float:
        # Occasionally beyond the duration to exercise clamping.
        return round(rng.uniform(0.0, duration * 1.2), 3)

    events = []
    t = 0.0
    first = True
    for _ in range(rng.randint(1, 12)):
        name = rng.choice(
            ["play_video", "pause_video", "seek_video", "stop_video", "complete_video",
             "load_video", "speed_change"]
        )
        kwargs: dict = {"duration": duration if first else None}
        if name == "seek_video":
            kwargs["old_time"] = pos() if rng.random() < 0.9 else None
            kwargs["new_time"] = pos() if rng.random() < 0.9 else None
        else:
            kwargs["current_time"] = pos() if rng.random() < 0.9 else None
        events.append(video_event(name, video=video, t=t, **kwargs))
        first = False
        t += rng.uniform(1.0, 30.0)
    return events
