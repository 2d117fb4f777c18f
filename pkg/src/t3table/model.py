"""Core domain types: event taxonomy, team sides, tuples, and summary tables.

Everything here is an immutable value; all other modules build on these.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterator, Mapping


class EventType(Enum):
    """The eight summary-table columns, in canonical order."""

    GOALS = "Goals"
    SHOTS = "Shots"
    FOULS = "Fouls"
    YELLOW_CARDS = "Yellow Cards"
    RED_CARDS = "Red Cards"
    CORNER_KICKS = "Corner Kicks"
    FREE_KICKS = "Free Kicks"
    OFFSIDES = "Offsides"

    @property
    def column_header(self) -> str:
        return self.value


# Canonical column order; all serialization and indexing uses this.
EVENT_ORDER: tuple[EventType, ...] = tuple(EventType)


class DifficultyGroup(Enum):
    EASY = "Easy"
    MEDIUM = "Medium"
    HARD = "Hard"


_DIFFICULTY: dict[EventType, DifficultyGroup] = {
    EventType.GOALS: DifficultyGroup.EASY,
    EventType.RED_CARDS: DifficultyGroup.EASY,
    EventType.SHOTS: DifficultyGroup.HARD,
    EventType.FOULS: DifficultyGroup.HARD,
    EventType.YELLOW_CARDS: DifficultyGroup.MEDIUM,
    EventType.CORNER_KICKS: DifficultyGroup.MEDIUM,
    EventType.FREE_KICKS: DifficultyGroup.MEDIUM,
    EventType.OFFSIDES: DifficultyGroup.MEDIUM,
}


def difficulty_of(event: EventType) -> DifficultyGroup:
    """Difficulty group of a summary column (fixed partition)."""
    return _DIFFICULTY[event]


def events_in_group(group: DifficultyGroup) -> tuple[EventType, ...]:
    return tuple(e for e in EVENT_ORDER if _DIFFICULTY[e] is group)


class TeamSide(Enum):
    HOME = "Home Team"
    AWAY = "Away Team"

    @property
    def display(self) -> str:
        return self.value

    @property
    def opponent(self) -> "TeamSide":
        return TeamSide.AWAY if self is TeamSide.HOME else TeamSide.HOME


TEAM_ORDER: tuple[TeamSide, ...] = (TeamSide.HOME, TeamSide.AWAY)


class RawEventLabel(Enum):
    """Surface event labels as they appear in extracted tuples."""

    GOAL = "goal"
    SHOT = "shot"
    SAVED_ATTEMPT = "saved attempt"
    BLOCKED_ATTEMPT = "blocked attempt"
    MISSED_ATTEMPT = "missed attempt"
    FOUL = "foul"
    HANDBALL = "handball"
    DANGEROUS_PLAY = "dangerous play"
    YELLOW_CARD = "yellow card"
    RED_CARD = "red card"
    SECOND_YELLOW_CARD = "second yellow card"
    CORNER_KICK = "corner kick"
    FREE_KICK = "free kick"
    PENALTY = "penalty"
    OFFSIDE = "offside"


@dataclass(frozen=True, slots=True)
class Unknown:
    """An event label that did not resolve; carried as a value, never an error."""

    text: str


def _fold(text: str) -> str:
    # lowercase, strip punctuation, collapse whitespace
    return re.sub(r"[^a-z0-9]+", " ", text.lower()).strip()


def _load_synonyms() -> dict[str, RawEventLabel]:
    raw = resources.files("t3table.assets").joinpath("event_synonyms.json").read_text("utf-8")
    table: dict[str, RawEventLabel] = {}
    for canonical, synonyms in json.loads(raw).items():
        label = RawEventLabel(canonical)
        table[_fold(canonical)] = label
        for s in synonyms:
            key = _fold(s)
            if key in table and table[key] is not label:
                raise ValueError(f"synonym {s!r} maps to two labels")
            table[key] = label
    return table


_SYNONYMS: dict[str, RawEventLabel] = _load_synonyms()


def normalize_label(text: str) -> RawEventLabel | Unknown:
    """Resolve a surface event string to a canonical label, else Unknown(text)."""
    return _SYNONYMS.get(_fold(text), Unknown(text))


def known_label_keys() -> frozenset[str]:
    """Folded keys of the synonym map (for coverage checks)."""
    return frozenset(_SYNONYMS)


_PLAYER_TAG = re.compile(r"Player[1-9]\d*\Z")


@dataclass(frozen=True, slots=True)
class EventTuple:
    """One extracted event: optional player tag, team side, raw label."""

    team: TeamSide
    label: RawEventLabel | Unknown
    player: str | None = None

    def __post_init__(self) -> None:
        if self.player is not None and not _PLAYER_TAG.match(self.player):
            raise ValueError(f"player must look like Player<n>, got {self.player!r}")


@dataclass(frozen=True, slots=True)
class SummaryTable:
    """2 (teams) x 8 (event types) grid of non-negative integer counts."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.counts) != 2 or any(len(row) != 8 for row in self.counts):
            raise ValueError("summary table must be 2x8")
        for row in self.counts:
            for cell in row:
                if not isinstance(cell, int) or isinstance(cell, bool) or cell < 0:
                    raise ValueError(f"cells must be integers >= 0, got {cell!r}")

    @classmethod
    def zero(cls) -> "SummaryTable":
        return cls(((0,) * 8, (0,) * 8))

    @classmethod
    def from_rows(cls, home: Iterator[int] | list[int], away: Iterator[int] | list[int]) -> "SummaryTable":
        return cls((tuple(home), tuple(away)))

    @classmethod
    def from_cells(cls, cells: Mapping[tuple[TeamSide, EventType], int]) -> "SummaryTable":
        return cls(
            tuple(
                tuple(cells.get((team, event), 0) for event in EVENT_ORDER)
                for team in TEAM_ORDER
            )
        )

    def get(self, team: TeamSide, event: EventType) -> int:
        return self.counts[TEAM_ORDER.index(team)][EVENT_ORDER.index(event)]

    def row(self, team: TeamSide) -> tuple[int, ...]:
        return self.counts[TEAM_ORDER.index(team)]

    def add(self, other: "SummaryTable") -> "SummaryTable":
        return SummaryTable(
            tuple(
                tuple(a + b for a, b in zip(ra, rb))
                for ra, rb in zip(self.counts, other.counts)
            )
        )

    def cells(self) -> Iterator[tuple[TeamSide, EventType, int]]:
        for team, row in zip(TEAM_ORDER, self.counts):
            for event, value in zip(EVENT_ORDER, row):
                yield team, event, value

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class MatchInstance:
    """One dataset entry: commentary text plus optional ground-truth table."""

    id: str
    commentary: str
    ground_truth: SummaryTable | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.commentary:
            raise ValueError("commentary must be non-empty")


@dataclass(frozen=True)
class AnnotationSet:
    """Per-annotator tables for one instance; at least one annotator."""

    tables: tuple[SummaryTable, ...]

    def __post_init__(self) -> None:
        if not self.tables:
            raise ValueError("no annotations")
