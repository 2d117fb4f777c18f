from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from t3table.model import (
    EventTuple,
    RawEventLabel,
    SummaryTable,
    TeamSide,
    Unknown,
)
from t3table.tuples import aggregate_majority, integrate, parse_tuples

HOME, AWAY = TeamSide.HOME, TeamSide.AWAY


# Literal transcription of the reference counting rules, kept independent of
# the library's label-effects table on purpose.
def naive_recount(tuples):
    stats = {
        team: {
            "goals": 0, "shots": 0, "fouls": 0, "yellow cards": 0,
            "red cards": 0, "corner kicks": 0, "free kicks": 0, "offsides": 0,
        }
        for team in (HOME, AWAY)
    }
    for t in tuples:
        if isinstance(t.label, Unknown):
            continue
        event = t.label.value
        row = stats[t.team]
        if event == "goal":
            row["goals"] += 1
            row["shots"] += 1
        elif event in ("shot", "saved attempt", "blocked attempt", "missed attempt"):
            row["shots"] += 1
        elif event in ("foul", "handball", "dangerous play"):
            row["fouls"] += 1
        elif event == "yellow card":
            row["yellow cards"] += 1
        elif event in ("red card", "second yellow card"):
            row["red cards"] += 1
            if event == "second yellow card":
                row["yellow cards"] += 1
        elif event == "corner kick":
            row["corner kicks"] += 1
        elif event in ("free kick", "penalty"):
            row["free kicks"] += 1
        elif event == "offside":
            row["offsides"] += 1
    order = ["goals", "shots", "fouls", "yellow cards", "red cards", "corner kicks", "free kicks", "offsides"]
    return SummaryTable.from_rows([stats[HOME][k] for k in order], [stats[AWAY][k] for k in order])


tuple_strategy = st.builds(
    EventTuple,
    team=st.sampled_from([HOME, AWAY]),
    label=st.one_of(st.sampled_from(list(RawEventLabel)), st.builds(Unknown, st.text(max_size=5))),
    player=st.one_of(st.none(), st.integers(min_value=1, max_value=40).map(lambda n: f"Player{n}")),
)
tuple_lists = st.lists(tuple_strategy, max_size=30)


# --- parse_tuples -------------------------------------------------------------

def test_parse_three_element_tuple():
    report = parse_tuples("(Player28, Away Team, goal)")
    assert report.tuples == (EventTuple(team=AWAY, label=RawEventLabel.GOAL, player="Player28"),)
    assert report.rejected_lines == ()


def test_parse_two_element_tuple_with_numbering():
    report = parse_tuples("1. (Home Team, corner kick)")
    assert report.tuples == (EventTuple(team=HOME, label=RawEventLabel.CORNER_KICK),)


def test_parse_rejects_unresolvable_team():
    report = parse_tuples("(Player5, Blue Team, foul)")
    assert report.tuples == ()
    assert report.rejected_lines == (("(Player5, Blue Team, foul)", "unresolvable team"),)


def test_parse_tolerates_prose_and_bullets():
    text = """Here are the events:
- (Player3, Home Team, shots)
Some prose with a parenthetical (not a tuple).
* (Away Team, offside)
"""
    report = parse_tuples(text)
    assert [t.label for t in report.tuples] == [RawEventLabel.SHOT, RawEventLabel.OFFSIDE]
    assert report.rejected_lines == ()


def test_parse_unknown_label_is_value_not_error():
    report = parse_tuples("(Home Team, throw-in)")
    assert report.unknown_label_count == 1
    assert report.tuples[0].label == Unknown("throw-in")


def test_parse_non_tag_player_becomes_none():
    report = parse_tuples("(John Smith, Home Team, goal)")
    assert report.tuples == (EventTuple(team=HOME, label=RawEventLabel.GOAL, player=None),)


def test_parse_tolerates_decorated_player_tags():
    report = parse_tuples("(Player28(Away Team), Away Team, goal)")
    assert report.tuples == (EventTuple(team=AWAY, label=RawEventLabel.GOAL, player="Player28"),)


def test_parse_rejects_four_fields():
    report = parse_tuples("(a, b, c, d)")
    assert report.tuples == ()
    assert report.rejected_lines[0][1] == "expected 2 or 3 fields"


def test_parse_empty_text():
    report = parse_tuples("")
    assert report.tuples == () and report.rejected_lines == ()


# --- integrate ----------------------------------------------------------------

def test_integrate_goal_counts_goal_and_shot():
    table = integrate([EventTuple(team=AWAY, label=RawEventLabel.GOAL)])
    assert table.row(AWAY) == (1, 1, 0, 0, 0, 0, 0, 0)
    assert table.row(HOME) == (0,) * 8


def test_integrate_empty_is_zero():
    assert integrate([]) == SummaryTable.zero()


def test_integrate_second_yellow_adds_yellow_and_red():
    table = integrate([
        EventTuple(team=HOME, label=RawEventLabel.SECOND_YELLOW_CARD),
        EventTuple(team=HOME, label=RawEventLabel.FOUL),
    ])
    assert table.row(HOME) == (0, 0, 1, 1, 1, 0, 0, 0)


def test_integrate_straight_red_does_not_add_yellow():
    table = integrate([EventTuple(team=HOME, label=RawEventLabel.RED_CARD)])
    assert table.row(HOME) == (0, 0, 0, 0, 1, 0, 0, 0)


@pytest.mark.parametrize(
    ("label", "column"),
    [
        (RawEventLabel.SAVED_ATTEMPT, 1),
        (RawEventLabel.BLOCKED_ATTEMPT, 1),
        (RawEventLabel.MISSED_ATTEMPT, 1),
        (RawEventLabel.HANDBALL, 2),
        (RawEventLabel.DANGEROUS_PLAY, 2),
        (RawEventLabel.PENALTY, 6),
    ],
)
def test_integrate_derived_rules(label, column):
    table = integrate([EventTuple(team=HOME, label=label)])
    expected = [0] * 8
    expected[column] = 1
    assert table.row(HOME) == tuple(expected)


@given(tuple_lists)
def test_integrate_matches_naive_recount(tuples):
    assert integrate(tuples) == naive_recount(tuples)


@given(tuple_lists, st.randoms())
def test_integrate_order_invariant(tuples, rnd):
    shuffled = list(tuples)
    rnd.shuffle(shuffled)
    assert integrate(shuffled) == integrate(tuples)


@given(tuple_lists, tuple_lists)
def test_integrate_additive(a, b):
    assert integrate(list(a) + list(b)) == integrate(a).add(integrate(b))


@given(tuple_lists)
def test_integrate_conservation(tuples):
    known = [t for t in tuples if not isinstance(t.label, Unknown)]
    doubles = sum(
        1 for t in known if t.label in (RawEventLabel.GOAL, RawEventLabel.SECOND_YELLOW_CARD)
    )
    assert integrate(tuples).total() == len(known) + doubles


# --- aggregate_majority ----------------------------------------------------------

def _cell_table(value: int) -> SummaryTable:
    return SummaryTable.from_rows([value] + [0] * 7, [0] * 8)


def test_majority_strict():
    voted = aggregate_majority([_cell_table(3), _cell_table(3), _cell_table(4)])
    assert voted.row(HOME)[0] == 3


def test_majority_single_annotator_identity():
    table = SummaryTable.from_rows([1, 2, 3, 4, 5, 6, 7, 8], [8, 7, 6, 5, 4, 3, 2, 1])
    assert aggregate_majority([table]) == table


def test_majority_tie_breaks_to_smallest():
    voted = aggregate_majority([_cell_table(2), _cell_table(3)])
    assert voted.row(HOME)[0] == 2


def test_majority_all_two_annotator_ties():
    # exhaustive over small value pairs: a tie must always pick the smaller
    for a, b in itertools.product(range(4), repeat=2):
        voted = aggregate_majority([_cell_table(a), _cell_table(b)])
        assert voted.row(HOME)[0] == min(a, b)


def test_majority_empty_errors():
    with pytest.raises(ValueError, match="no annotations"):
        aggregate_majority([])


def test_annotation_set_requires_members():
    from t3table.model import AnnotationSet

    with pytest.raises(ValueError, match="no annotations"):
        AnnotationSet(tables=())
    votes = AnnotationSet(tables=(_cell_table(1), _cell_table(1), _cell_table(2)))
    assert aggregate_majority(votes.tables).row(HOME)[0] == 1
