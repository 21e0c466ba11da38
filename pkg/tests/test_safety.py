from __future__ import annotations

import pytest

from streamforge.aspkit import check_safety

from conftest import parse_one


def violations(text):
    return [v.variable for v in check_safety(parse_one(text))]


def test_symmetric_pair_constraint_is_safe():
    assert violations(":- unit2sensor(U1,S), unit2sensor(U2,S), U1 > U2.") == []


def test_head_variable_never_bound():
    assert violations("p(X) :- q(Y).") == ["X"]


def test_builtin_only_occurrence():
    assert violations(":- X > 3.") == ["X"]


def test_negated_occurrence_does_not_bind():
    assert violations(":- not p(X).") == ["X"]
    assert violations(":- not not p(X).") == ["X"]
    assert violations(":- q(X), not p(X).") == []


def test_one_violation_per_variable():
    assert violations("p(X, X) :- X > 1, X < 5.") == ["X"]


def test_anonymous_variable_is_exempt():
    assert violations(":- unit2sensor(U,_), not unit2zone(U,_).") == []
    assert violations(":- p(_).") == []


def test_arithmetic_occurrence_alone_binds_only_if_invertible():
    # single-variable +/- shapes are solvable during matching
    assert violations("stable(1,P,T) :- on(1,P,T-1), goal_on(1,P).") == []
    assert violations("q(X) :- p(X+1).") == []
    # multiplication and multi-variable arithmetic are not
    assert violations("q(X) :- p(X*2).") == ["X"]
    assert violations("q(X) :- p(X+Y), r(Y).") == ["X"]


def test_aggregate_element_scope_is_local():
    # element-local variables bound inside the condition are fine
    assert violations(":- sensor(S), #count{U: unit2sensor(U,S)} > 1.") == []
    # a head variable cannot be bound from inside an aggregate element
    assert violations("p(X) :- #count{X : q(X)} > 1.") == ["X"]
    # guards are rule-level occurrences and need a global binding
    assert violations(":- #count{U: unit2sensor(U,S)} > N.") == ["N"]


def test_unbound_aggregate_element_variable():
    assert violations(":- #count{X : not p(X)} > 0.") == ["X"]


def test_choice_element_scope():
    assert violations("1 { unit2zone(U,Z) : comUnit(U) } 1 :- zone(Z).") == []
    assert violations("{ p(X) }.") == ["X"]


def test_shared_variable_between_rule_and_element():
    assert (
        violations(
            ":- comUnit(U), #count{Z: unit2zone(U,Z)} = 0, #count{S: unit2sensor(U,S)} > 0."
        )
        == []
    )


@pytest.mark.parametrize(
    "text",
    [
        ":- unit2zone(U+1,_), not unit2zone(U,_), comUnit(U), comUnit(U+1).",
        ":- comUnit(U1), comUnit(U2), U1 < U2, sensor(S), S = #min{S': sensor(S')}, "
        "unit2sensor(U2,S), #count{Z: unit2zone(U1,Z)} = 0.",
        ":- moved(D1,T-1), moved(D2,T), D2 <= D1, disk(D1+1).",
    ],
)
def test_paper_shaped_constraints_are_safe(text):
    assert violations(text) == []
