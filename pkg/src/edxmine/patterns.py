"""Frequent ordered event-type subsequence mining (PrefixSpan).

Sequences are per-user or per-session streams of event-type symbols.
Patterns are counted by subsequence containment (not necessarily
contiguous), one count per containing sequence. The miner grows patterns
depth-first over projected databases kept as per-sequence suffix offsets;
input sequences are never copied.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .engagement import DEFAULT_PASSING_THRESHOLD
from .events import Event, EventType, ProblemPayload, RETAINED_EVENT_TYPES
from .sessions import DEFAULT_GAP, group_into_sessions

CHECK_PASS = "check_pass"
CHECK_FAIL = "check_fail"


class ParameterMismatchError(ValueError):
    """Contrast inputs were mined with different parameters."""


@dataclass(frozen=True)
class SymbolAlphabet:
    """Stable symbol-code table; at most 16 symbols."""

    names: tuple[str, ...]

    def code_of(self, name: str) -> int:
        return self.names.index(name)

    def name_of(self, code: int) -> str:
        return self.names[code]

    def render(self, symbols: Sequence[int]) -> str:
        return ">".join(self.names[code] for code in symbols)


def build_alphabet(split_check_outcome: bool = False) -> SymbolAlphabet:
    names = []
    for etype in RETAINED_EVENT_TYPES:
        if split_check_outcome and etype is EventType.PROBLEM_CHECK:
            names.extend([CHECK_PASS, CHECK_FAIL])
        else:
            names.append(etype.value)
    return SymbolAlphabet(names=tuple(names))


@dataclass(frozen=True)
class SymbolSequence:
    owner: str
    symbols: tuple[int, ...]


@dataclass(frozen=True)
class SequencePattern:
    symbols: tuple[int, ...]
    support: int


def encode_sequences(
    events: Iterable[Event],
    granularity: str = "per_session",
    split_check_outcome: bool = False,
    passing_threshold: float = DEFAULT_PASSING_THRESHOLD,
    gap: timedelta = DEFAULT_GAP,
    collapse_runs: bool = False,
) -> tuple[list[SymbolSequence], SymbolAlphabet]:
    """Turn parsed events into one symbol sequence per user or per session."""
    if granularity not in ("per_user", "per_session"):
        raise ValueError(f"unknown granularity: {granularity!r}")
    alphabet = build_alphabet(split_check_outcome)
    codes = {name: i for i, name in enumerate(alphabet.names)}

    by_user: dict[str, list[Event]] = {}
    for ev in events:
        by_user.setdefault(ev.user_id, []).append(ev)

    def symbol_for(ev: Event) -> int:
        name = ev.event_type.value
        if split_check_outcome and ev.event_type is EventType.PROBLEM_CHECK:
            score = None
            if isinstance(ev.payload, ProblemPayload):
                payload = ev.payload
                if payload.grade is not None and payload.max_grade:
                    score = payload.grade / payload.max_grade
            name = CHECK_PASS if score is not None and score >= passing_threshold else CHECK_FAIL
        return codes[name]

    sequences: list[SymbolSequence] = []
    for user_id in sorted(by_user):
        user_events = sorted(by_user[user_id], key=lambda e: e.timestamp)
        if granularity == "per_user":
            groups = [(user_id, user_events)]
        else:
            groups = group_into_sessions(user_events, gap)
        for owner, evs in groups:
            symbols: list[int] = []
            for ev in evs:
                code = symbol_for(ev)
                if collapse_runs and symbols and symbols[-1] == code:
                    continue
                symbols.append(code)
            if symbols:
                sequences.append(SymbolSequence(owner=owner, symbols=tuple(symbols)))
    return sequences, alphabet


def prefixspan(
    sequences: Sequence[SymbolSequence], min_support: int, max_len: int = 6
) -> list[SequencePattern]:
    """All patterns up to ``max_len`` with subsequence-support >= ``min_support``.

    Output is canonical: sorted by length, then symbol order, regardless of
    input order.
    """
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")

    db = [seq.symbols for seq in sequences]
    found: list[SequencePattern] = []

    def grow(projection: list[tuple[int, int]], prefix: tuple[int, ...]) -> None:
        # First occurrence of each symbol per projected suffix.
        occurrences: dict[int, list[tuple[int, int]]] = {}
        for seq_idx, offset in projection:
            seq = db[seq_idx]
            seen: set[int] = set()
            for pos in range(offset, len(seq)):
                sym = seq[pos]
                if sym not in seen:
                    seen.add(sym)
                    occurrences.setdefault(sym, []).append((seq_idx, pos + 1))
        for sym in sorted(occurrences):
            postings = occurrences[sym]
            support = len(postings)
            if support < min_support:
                continue
            pattern = prefix + (sym,)
            found.append(SequencePattern(symbols=pattern, support=support))
            if len(pattern) < max_len:
                grow(postings, pattern)

    grow([(i, 0) for i in range(len(db))], ())
    found.sort(key=lambda p: (len(p.symbols), p.symbols))
    return found


@dataclass(frozen=True)
class MiningResult:
    """One class's mining output plus the parameters that produced it."""

    patterns: tuple[SequencePattern, ...]
    n_sequences: int
    params: Mapping

    def relative_support(self, symbols: tuple[int, ...]) -> float:
        for pattern in self.patterns:
            if pattern.symbols == symbols:
                return pattern.support / self.n_sequences if self.n_sequences else 0.0
        return 0.0


def mine(
    sequences: Sequence[SymbolSequence],
    min_support: int,
    max_len: int = 6,
    params: Optional[Mapping] = None,
) -> MiningResult:
    patterns = prefixspan(sequences, min_support, max_len)
    if params is None:
        params = {"min_support": min_support, "max_len": max_len}
    return MiningResult(
        patterns=tuple(patterns), n_sequences=len(sequences), params=dict(params)
    )


@dataclass(frozen=True)
class ContrastRow:
    symbols: tuple[int, ...]
    gap: float
    per_class: Mapping  # class name -> (support, relative_support)


def contrast_patterns(results: Mapping[str, MiningResult]) -> list[ContrastRow]:
    """Join per-class mining results on pattern, ranked by the largest
    cross-class relative-support gap."""
    items = list(results.items())
    if not items:
        return []
    reference = items[0][1].params
    for name, result in items[1:]:
        if dict(result.params) != dict(reference):
            raise ParameterMismatchError(
                f"mining parameters for {name!r} differ: {dict(result.params)} != {dict(reference)}"
            )

    all_patterns: dict[tuple[int, ...], dict[str, tuple[int, float]]] = {}
    for name, result in items:
        for pattern in result.patterns:
            cell = all_patterns.setdefault(pattern.symbols, {})
            rel = pattern.support / result.n_sequences if result.n_sequences else 0.0
            cell[name] = (pattern.support, rel)

    rows = []
    for symbols, cells in all_patterns.items():
        rels = [cells.get(name, (0, 0.0))[1] for name, _ in items]
        gap = max(rels) - min(rels)
        per_class = {
            name: cells.get(name, (0, 0.0)) for name, _ in items
        }
        rows.append(ContrastRow(symbols=symbols, gap=gap, per_class=per_class))
    rows.sort(key=lambda r: (-r.gap, len(r.symbols), r.symbols))
    return rows


def write_patterns_csv(
    path: Union[str, Path],
    result: MiningResult,
    alphabet: SymbolAlphabet,
    class_name: Optional[str] = None,
) -> None:
    fieldnames = ["pattern", "support", "relative_support"]
    if class_name is not None:
        fieldnames.append("class")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(fieldnames)
        for pattern in result.patterns:
            rel = pattern.support / result.n_sequences if result.n_sequences else 0.0
            row = [alphabet.render(pattern.symbols), pattern.support, rel]
            if class_name is not None:
                row.append(class_name)
            writer.writerow(row)


def write_contrast_csv(
    path: Union[str, Path], rows: Sequence[ContrastRow], alphabet: SymbolAlphabet
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["pattern", "support", "relative_support", "class"])
        for row in rows:
            for class_name in sorted(row.per_class):
                support, rel = row.per_class[class_name]
                writer.writerow(
                    [alphabet.render(row.symbols), support, rel, class_name]
                )
