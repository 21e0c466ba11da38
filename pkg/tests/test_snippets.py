from __future__ import annotations

import pytest

from streamforge.aspkit import (
    KIND_COMMENT_ONLY,
    KIND_CONSTRAINT_ONLY,
    KIND_RULES_AND_CONSTRAINTS,
    KIND_UNPARSEABLE,
    CompositionError,
    classify_snippet,
    compose,
)


@pytest.mark.parametrize(
    "text,kind",
    [
        ("% prefer symmetric placements", KIND_COMMENT_ONLY),
        ("", KIND_COMMENT_ONLY),
        ("   \n\t", KIND_COMMENT_ONLY),
        (":- a, b.", KIND_CONSTRAINT_ONLY),
        (":- a. :- b.", KIND_CONSTRAINT_ONLY),
        (
            "stable(1,P,T) :- on(1,P,T), goal_on(1,P), time(T). "
            ":- move(D,P,T), stable(D,Pp,T-1), on(D,Pp,T-1).",
            KIND_RULES_AND_CONSTRAINTS,
        ),
        ("fill(S) :- slot(S).", KIND_RULES_AND_CONSTRAINTS),
        (":- p(X", KIND_UNPARSEABLE),
        ("some prose, no code", KIND_UNPARSEABLE),
    ],
)
def test_classification(text, kind):
    assert classify_snippet(text).kind == kind


def test_comment_only_iff_nothing_parsed():
    snippet = classify_snippet("% a comment\n:- a.")
    assert snippet.kind == KIND_CONSTRAINT_ONLY


def test_compose_identity():
    assert compose("a.\nb :- a.", []) == "a.\nb :- a.\n"


def test_compose_appends_markers_in_order():
    snippets = [classify_snippet(":- a."), classify_snippet(":- b.")]
    out = compose("x.", snippets, ids=["s1", "s2"])
    assert out == "x.\n% --- streamliner s1 ---\n:- a.\n% --- streamliner s2 ---\n:- b.\n"


def test_compose_is_byte_deterministic():
    snippets = [classify_snippet("% note"), classify_snippet(":- q.")]
    first = compose("p.", snippets, ids=["a", "b"])
    second = compose("p.", snippets, ids=["a", "b"])
    assert first == second


def test_compose_rejects_broken_encoding():
    with pytest.raises(CompositionError):
        compose(":- p(X", [classify_snippet(":- a.")])


def test_composed_text_still_parses():
    from streamforge.aspkit import parse_program

    out = compose("a.\n", [classify_snippet(":- not a.")], ids=["k"])
    _, errors = parse_program(out)
    assert errors == []
