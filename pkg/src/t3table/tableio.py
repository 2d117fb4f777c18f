"""Summary-table serialization and tolerant recovery from raw model output.

The emitter is exact (golden CSV shape); the parser accepts CSV and markdown
pipe tables with reordered columns or rows and never raises on junk input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import EVENT_ORDER, EventType, SummaryTable, TeamSide

CSV_HEADER = "Team," + ",".join(e.column_header for e in EVENT_ORDER)


def to_csv(table: SummaryTable) -> str:
    """Exactly three LF-separated lines: header, Home Team row, Away Team row."""
    lines = [CSV_HEADER]
    for team in (TeamSide.HOME, TeamSide.AWAY):
        lines.append(team.display + "," + ",".join(str(v) for v in table.row(team)))
    return "\n".join(lines)


@dataclass(frozen=True, slots=True)
class ParsedTableOutcome:
    """Either a recovered table or a malformed marker with a reason code."""

    table: SummaryTable | None
    reason_code: str | None = None
    detail: str | None = None

    @property
    def is_ok(self) -> bool:
        return self.table is not None

    @classmethod
    def ok(cls, table: SummaryTable) -> "ParsedTableOutcome":
        return cls(table=table)

    @classmethod
    def malformed(cls, code: str, detail: str) -> "ParsedTableOutcome":
        return cls(table=None, reason_code=code, detail=detail)


def _norm(cell: str) -> str:
    return re.sub(r"[^a-z0-9]+", "", cell.lower())


# Fuzzy header lookup: lowercase alphanumeric comparison, singular accepted.
_HEADER_ALIASES: dict[str, EventType] = {}
for _e in EVENT_ORDER:
    _HEADER_ALIASES[_norm(_e.column_header)] = _e
    _HEADER_ALIASES[_norm(_e.column_header).rstrip("s")] = _e

# Filler cells make the whole table malformed: every cell is a required count.
_FILLERS = {"", "-", "--", "n/a", "na", "none", "nil", "unknown", "not mentioned", "notmentioned"}

_INT_CELL = re.compile(r"\A\d+\Z")
_SEPARATOR_CELL = re.compile(r"\A:?-{2,}:?\Z")


def _split_row(line: str) -> list[str]:
    if "|" in line:
        cells = [c.strip() for c in line.split("|")]
        # leading/trailing pipes produce empty edge cells
        if cells and cells[0] == "":
            cells = cells[1:]
        if cells and cells[-1] == "":
            cells = cells[:-1]
        return cells
    return [c.strip() for c in line.split(",")]


def _is_rowish(line: str) -> bool:
    return "|" in line or line.count(",") >= 2


def _clean_cell(cell: str) -> str:
    return cell.strip().strip("*`'\"").strip()


def _find_header(rows: list[list[str]]) -> tuple[int, dict[EventType, int]] | None:
    for i, row in enumerate(rows):
        columns: dict[EventType, int] = {}
        for j, cell in enumerate(row):
            event = _HEADER_ALIASES.get(_norm(cell))
            if event is not None and event not in columns:
                columns[event] = j
        if len(columns) == 8:
            return i, columns
    return None


def _team_of_row(row: list[str]) -> TeamSide | None:
    for cell in row:
        folded = cell.lower()
        if _INT_CELL.match(cell.strip()):
            continue
        if "home" in folded:
            return TeamSide.HOME
        if "away" in folded:
            return TeamSide.AWAY
    return None


def parse_model_table(text: str) -> ParsedTableOutcome:
    """Recover the first structurally valid 2x8 table from free-form output.

    Structural validity needs a header row resolving all eight event columns
    plus a home row and an away row; cell problems in a structurally valid
    table are reported as malformed rather than searching further.
    """
    lines = text.splitlines()
    blocks: list[list[list[str]]] = []
    current: list[list[str]] = []
    for line in lines:
        if _is_rowish(line):
            cells = _split_row(line)
            if all(_SEPARATOR_CELL.match(c) or c == "" for c in cells):
                continue  # markdown header separator
            current.append(cells)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)

    saw_header = False
    for block in blocks:
        found = _find_header(block)
        if found is None:
            continue
        saw_header = True
        header_idx, columns = found
        team_rows: dict[TeamSide, list[str]] = {}
        for i, row in enumerate(block):
            if i == header_idx:
                continue
            side = _team_of_row(row)
            if side is not None and side not in team_rows:
                team_rows[side] = row
        if len(team_rows) < 2:
            continue
        cells: dict[tuple[TeamSide, EventType], int] = {}
        for side, row in team_rows.items():
            for event, j in columns.items():
                if j >= len(row):
                    return ParsedTableOutcome.malformed(
                        "bad_cell", f"{side.display} row has no {event.column_header} cell"
                    )
                value = _clean_cell(row[j])
                if value.lower() in _FILLERS:
                    return ParsedTableOutcome.malformed(
                        "filler_cell",
                        f"{side.display} {event.column_header} is {row[j].strip()!r}, not a count",
                    )
                if not _INT_CELL.match(value):
                    return ParsedTableOutcome.malformed(
                        "bad_cell",
                        f"{side.display} {event.column_header} is {row[j].strip()!r}, not a non-negative integer",
                    )
                cells[(side, event)] = int(value)
        return ParsedTableOutcome.ok(SummaryTable.from_cells(cells))

    if saw_header:
        return ParsedTableOutcome.malformed("missing_team_rows", "found event columns but fewer than 2 team rows")
    return ParsedTableOutcome.malformed("no_table_found", "no table with the eight event columns found")
