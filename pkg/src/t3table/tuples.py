"""Tuple-line parsing and deterministic integration into summary tables."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    EventTuple,
    EventType,
    RawEventLabel,
    SummaryTable,
    TeamSide,
    Unknown,
    normalize_label,
)

# Column increments applied per label. A goal is also a shot; a second yellow
# is also a red; handball and dangerous play count as fouls; a penalty counts
# as a free kick.
LABEL_EFFECTS: dict[RawEventLabel, tuple[EventType, ...]] = {
    RawEventLabel.GOAL: (EventType.GOALS, EventType.SHOTS),
    RawEventLabel.SHOT: (EventType.SHOTS,),
    RawEventLabel.SAVED_ATTEMPT: (EventType.SHOTS,),
    RawEventLabel.BLOCKED_ATTEMPT: (EventType.SHOTS,),
    RawEventLabel.MISSED_ATTEMPT: (EventType.SHOTS,),
    RawEventLabel.FOUL: (EventType.FOULS,),
    RawEventLabel.HANDBALL: (EventType.FOULS,),
    RawEventLabel.DANGEROUS_PLAY: (EventType.FOULS,),
    RawEventLabel.YELLOW_CARD: (EventType.YELLOW_CARDS,),
    RawEventLabel.RED_CARD: (EventType.RED_CARDS,),
    RawEventLabel.SECOND_YELLOW_CARD: (EventType.RED_CARDS, EventType.YELLOW_CARDS),
    RawEventLabel.CORNER_KICK: (EventType.CORNER_KICKS,),
    RawEventLabel.FREE_KICK: (EventType.FREE_KICKS,),
    RawEventLabel.PENALTY: (EventType.FREE_KICKS,),
    RawEventLabel.OFFSIDE: (EventType.OFFSIDES,),
}


def primary_event(label: RawEventLabel | Unknown) -> EventType | None:
    """Column a label is filed under in diagnostic reports (first increment)."""
    if isinstance(label, Unknown):
        return None
    return LABEL_EFFECTS[label][0]


@dataclass(frozen=True)
class TupleParseReport:
    tuples: tuple[EventTuple, ...]
    rejected_lines: tuple[tuple[str, str], ...] = ()
    unknown_label_count: int = 0


_PAREN_GROUP = re.compile(r"\(([^()]*)\)")
_PLAYER_TAG = re.compile(r"\APlayer[1-9]\d*\Z")
# anonymized tags sometimes leak into tuples as Player5(Home Team); their
# parens break the tuple grammar, so strip the decoration up front
_TAG_DECORATION = re.compile(r"(Player[1-9]\d*)\((?:Home|Away) Team\)")


def _resolve_team(text: str) -> TeamSide | None:
    folded = text.lower()
    if "home" in folded:
        return TeamSide.HOME
    if "away" in folded:
        return TeamSide.AWAY
    return None


def parse_tuples(text: str) -> TupleParseReport:
    """Recover (player, team, event) / (team, event) tuples from model output.

    Tolerates numbering, bullets, and surrounding prose. Parenthesized groups
    with fewer than two comma-separated fields are treated as prose, not
    rejected. Player fields that are not Player<n> tags are dropped (the team
    still counts); teams that resolve to neither home nor away reject the line.
    """
    tuples: list[EventTuple] = []
    rejected: list[tuple[str, str]] = []
    unknown = 0
    for line in text.splitlines():
        line = _TAG_DECORATION.sub(r"\1", line)
        for group in _PAREN_GROUP.findall(line):
            parts = [p.strip() for p in group.split(",")]
            if len(parts) < 2:
                continue  # prose parenthetical, e.g. a player tag
            if len(parts) > 3:
                rejected.append((line.strip(), "expected 2 or 3 fields"))
                continue
            if len(parts) == 3:
                player_text, team_text, event_text = parts
            else:
                player_text = None
                team_text, event_text = parts
            team = _resolve_team(team_text)
            if team is None:
                rejected.append((line.strip(), "unresolvable team"))
                continue
            player = player_text if player_text and _PLAYER_TAG.match(player_text) else None
            label = normalize_label(event_text)
            if isinstance(label, Unknown):
                unknown += 1
            tuples.append(EventTuple(team=team, label=label, player=player))
    return TupleParseReport(tuple(tuples), tuple(rejected), unknown)


def integrate(tuples: Iterable[EventTuple]) -> SummaryTable:
    """Count tuples into a summary table. Unknown labels add nothing."""
    cells: Counter[tuple[TeamSide, EventType]] = Counter()
    for t in tuples:
        if isinstance(t.label, Unknown):
            continue
        for event in LABEL_EFFECTS[t.label]:
            cells[(t.team, event)] += 1
    return SummaryTable.from_cells(cells)


def count_unknown(tuples: Iterable[EventTuple]) -> int:
    return sum(1 for t in tuples if isinstance(t.label, Unknown))


def aggregate_majority(tables: Sequence[SummaryTable]) -> SummaryTable:
    """Cell-wise majority vote; ties broken by the smallest tied value."""
    if not tables:
        raise ValueError("no annotations")
    cells: dict[tuple[TeamSide, EventType], int] = {}
    for team, event, _ in tables[0].cells():
        votes = Counter(t.get(team, event) for t in tables)
        top = max(votes.values())
        cells[(team, event)] = min(v for v, n in votes.items() if n == top)
    return SummaryTable.from_cells(cells)
