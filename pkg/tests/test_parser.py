from __future__ import annotations

import pytest

from streamforge.aspkit import (
    Arith,
    BuiltinAtom,
    Choice,
    Directive,
    Number,
    Rule,
    SymbolicAtom,
    Variable,
    format_program,
    format_statement,
    parse_program,
)

from conftest import parse_one


def test_single_constraint_parses_cleanly():
    statements, errors = parse_program(
        ":- unit2sensor(U1,S), unit2sensor(U2,S), U1 > U2."
    )
    assert errors == []
    assert len(statements) == 1
    rule = statements[0]
    assert rule.head is None
    assert len(rule.body) == 3


def test_empty_program():
    assert parse_program("") == ([], [])


def test_arithmetic_term_in_argument():
    rule = parse_one(":- move(D,P,T), move(D,P,T+1).")
    second = rule.body[1].atom
    assert isinstance(second, SymbolicAtom)
    arith = second.args[2]
    assert isinstance(arith, Arith) and arith.op == "+"
    assert arith.left == Variable("T") and arith.right == Number(1)


def test_unbalanced_parenthesis_position():
    statements, errors = parse_program(":- p(X")
    assert statements == []
    assert len(errors) == 1
    assert errors[0].column == 7


def test_invalid_utf8_is_a_parse_error():
    statements, errors = parse_program(b"\xff\xfe p.")
    assert statements == []
    assert len(errors) == 1
    assert "UTF-8" in errors[0].message


def test_comments_are_skipped():
    statements, errors = parse_program("% header\na. % trailing\n% tail\n")
    assert errors == []
    assert [format_statement(s) for s in statements] == ["a."]


def test_error_recovery_resumes_at_statement_boundary():
    statements, errors = parse_program(":- a b. q(1). :- also bad. r(2).")
    assert [format_statement(s) for s in statements] == ["q(1).", "r(2)."]
    assert len(errors) == 2


def test_negation_levels():
    rule = parse_one("a :- not b, not not c.")
    assert [l.negations for l in rule.body] == [1, 2]
    with_error = parse_program("a :- not not not b.")
    assert with_error[1]


def test_choice_guards_default_to_leq():
    rule = parse_one("1 {a; b} 1.")
    head = rule.head
    assert isinstance(head, Choice)
    assert head.left_guard == (Number(1), "<=")
    assert head.right_guard == ("<=", Number(1))
    explicit = parse_one("1 <= {a; b} <= 1.")
    assert explicit.head == head


def test_choice_element_condition():
    rule = parse_one("1 { unit2zone(U,Z) : comUnit(U) } 1 :- zone(Z).")
    element = rule.head.elements[0]
    assert element.atom.predicate == "unit2zone"
    assert element.condition[0].atom.predicate == "comUnit"


def test_aggregate_with_left_guard():
    rule = parse_one(":- sensor(S), S = #min{S': sensor(S')}.")
    agg = rule.body[1].atom
    assert agg.function == "min"
    assert agg.left_guard == (Variable("S"), "=")
    assert agg.right_guard is None


def test_builtin_with_arithmetic():
    rule = parse_one(":- p(T1), p(T2), T1 = T2 + 1.")
    builtin = rule.body[2].atom
    assert isinstance(builtin, BuiltinAtom)
    assert isinstance(builtin.right, Arith)


def test_negative_integer_literal():
    rule = parse_one(":- push(X,Y,-1,0,T).")
    atom = rule.body[0].atom
    assert atom.args[2] == Number(-1)


def test_strings_and_special_constants():
    rule = parse_one('p("hi \\"there\\"", #inf, #sup).')
    printed = format_statement(rule)
    reparsed = parse_one(printed)
    assert reparsed == rule


def test_passthrough_directives():
    statements, errors = parse_program("#const ucap = 2.\n#show move/3.\na.")
    assert errors == []
    assert isinstance(statements[0], Directive)
    assert statements[0].name == "const"
    assert statements[0].text == "#const ucap = 2."
    assert isinstance(statements[1], Directive)
    assert isinstance(statements[2], Rule)


def test_unsupported_directive_is_an_error():
    statements, errors = parse_program("#minimize { 1,X : p(X) }. a.")
    assert len(errors) == 1
    assert "minimize" in errors[0].message
    assert [format_statement(s) for s in statements] == ["a."]


def test_primed_identifiers():
    rule = parse_one("sensor'(S') :- sensor(S'), q(f').")
    assert rule.head.predicate == "sensor'"
    assert rule.body[0].atom.args[0] == Variable("S'")


def test_source_spans_cover_statements():
    text = "a.\n  b :- a.\n"
    statements, _ = parse_program(text)
    assert text[slice(*statements[0].source_span)] == "a."
    assert text[slice(*statements[1].source_span)] == "b :- a."


CANONICAL_SAMPLES = [
    "a.",
    ":- a, not b, not not c.",
    "p(X, f(Y, 1), \"s\") :- q(X), r(Y).",
    "1 <= { p(X) : q(X), not r(X); s } <= 3 :- t(X).",
    ":- 2 < #count { X, Y : p(X, Y); Z : q(Z) } <= 7, r.",
    ":- p((X+1)*2, Y-3/Z).",
    "{ a } :- not not b.",
]


@pytest.mark.parametrize("text", CANONICAL_SAMPLES)
def test_roundtrip_is_structural_fixpoint(text):
    statements, errors = parse_program(text)
    assert not errors
    printed = format_program(statements)
    again, errors2 = parse_program(printed)
    assert not errors2
    assert again == statements
    assert format_program(again) == printed
