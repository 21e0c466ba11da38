from __future__ import annotations

import random

import pytest

from streamforge.aspkit import parse_program
from streamforge.ground_eval import (
    DomainTooLarge,
    GroundProgram,
    GroundRule,
    GroundingError,
    UniverseTooLarge,
    UnsupportedFeature,
    check_sat,
    ground,
    stable_models,
)


def gp_of(text, **kwargs):
    statements, errors = parse_program(text)
    assert not errors, [str(e) for e in errors]
    return ground(statements, **kwargs)


def models_of(text, cap=None):
    return [set(m) for m in stable_models(gp_of(text), model_cap=cap)]


# ---------------------------------------------------------------------------
# Grounding


def test_direct_instantiation():
    gp = gp_of("p(1). p(2). q(X) :- p(X).")
    assert set(r.render() for r in gp.rules) == {
        "p(1).",
        "p(2).",
        "q(1) :- p(1).",
        "q(2) :- p(2).",
    }


def test_false_builtin_drops_rule_true_builtin_drops_literal():
    gp = gp_of("p(1). p(2). :- p(X), X > 1.")
    constraints = [r.render() for r in gp.rules if r.head is None]
    assert constraints == [":- p(2)."]


def test_choice_rewriting_pairs():
    gp = gp_of("{a}.")
    assert set(r.render() for r in gp.rules) == {"a :- not a'.", "a' :- not a."}
    assert gp.aux_atoms == {"a'"}


def test_aux_names_avoid_collisions():
    gp = gp_of("{a}. b :- a'. a' :- a.")
    assert "a''" in gp.aux_atoms or any("''" in a for a in gp.aux_atoms)


def test_arithmetic_evaluated_away():
    gp = gp_of("moves(3). time(1) :- moves(M). time(T+1) :- time(T), moves(M), T < M.")
    heads = {r.head for r in gp.rules}
    assert {"time(1)", "time(2)", "time(3)"} <= heads
    assert "time(4)" not in heads


def test_const_directive_substitution():
    gp = gp_of("#const cap = 2.\np(1). p(2). p(3). :- p(X), X > cap.")
    constraints = sorted(r.render() for r in gp.rules if r.head is None)
    assert constraints == [":- p(3)."]


def test_unsupported_features_rejected():
    with pytest.raises(UnsupportedFeature):
        gp_of("p(f(a)).")
    with pytest.raises(UnsupportedFeature):
        gp_of("q. :- q, #count{ X : p(X) } > 0.")
    with pytest.raises(UnsupportedFeature):
        gp_of("node(1). 1 { p(X) : node(X) } 1.")
    with pytest.raises(GroundingError):
        gp_of("p(X) :- q(Y).")  # unsafe


def test_domain_cap():
    text = "num(1). num(2). num(3). num(4). p(A,B,C,D) :- num(A), num(B), num(C), num(D)."
    with pytest.raises(DomainTooLarge):
        gp_of(text, max_rules=100)


def test_universe_cap():
    text = " ".join("{a%d}." % i for i in range(13))  # 26 atoms with aux
    gp = gp_of(text)
    with pytest.raises(UniverseTooLarge):
        stable_models(gp)


# ---------------------------------------------------------------------------
# Stable-model enumeration: hand-checked expectation suite


ORACLE_SUITE = [
    # (program, expected stable models, as sets of atom strings)
    ("", [set()]),
    ("a.", [{"a"}]),
    ("a. b :- a.", [{"a", "b"}]),
    ("a :- not b. b :- not a.", [{"a"}, {"b"}]),
    ("a :- a.", [set()]),
    ("a :- not a.", []),
    ("a :- not b.", [{"a"}]),
    ("a. :- a.", []),
    (":- not a.", []),
    ("a :- not not a.", [set(), {"a"}]),
    ("a :- b. b :- a.", [set()]),
    ("a :- not b. b :- not c. c :- not a.", []),
    ("{a}. :- not a.", [{"a"}]),
    ("{a}. {b}. :- a, b.", [{"b"}, {"a"}, set()]),
    ("a. b :- a, not c. c :- b.", []),
    ("p. q :- p, not r.", [{"p", "q"}]),
    ("a :- b, not c. b. c :- not d. d :- not c.", [{"b", "c"}, {"a", "b", "d"}]),
    ("{a}. b :- a. :- not b.", [{"a", "b"}]),
    ("{a}. a' :- a.", [{"a", "a'"}, set()]),
    ("p(1). p(2). q :- p(1), p(2). :- not q.", [{"p(1)", "p(2)", "q"}]),
    ("a :- not b. b :- not a. :- a.", [{"b"}]),
    ("x :- y. y :- x. x :- not z. z :- not x.", [{"x", "y"}, {"z"}]),
    ("a. b :- not not a.", [{"a", "b"}]),
    ("b :- not not a.", [set()]),
    ("{c}. a :- c. a :- not c. :- not a.", [{"c", "a"}, {"a"}]),
]


@pytest.mark.parametrize("text,expected", ORACLE_SUITE, ids=range(len(ORACLE_SUITE)))
def test_oracle_suite(text, expected):
    got = models_of(text)
    assert got == expected


def test_model_cap_and_canonical_order():
    assert models_of("a :- not b. b :- not a.", cap=1) == [{"a"}]


def test_check_sat_examples():
    assert check_sat(parse_program("a :- not b. b :- not a.")[0]) == "SAT"
    assert check_sat(parse_program("a :- not b. b :- not a. :- a. :- b.")[0]) == "UNSAT"
    assert check_sat(parse_program(":- not a.")[0]) == "UNSAT"


# ---------------------------------------------------------------------------
# Properties


def _satisfies(rule: GroundRule, interpretation: set[str]) -> bool:
    body = (
        all(a in interpretation for a in rule.pos)
        and all(a not in interpretation for a in rule.neg)
        and all(a in interpretation for a in rule.nneg)
    )
    if rule.head is None:
        return not body
    return (not body) or rule.head in interpretation


def _full_models(text: str) -> list[set[str]]:
    """Models including auxiliary atoms, for rule-satisfaction checks."""
    gp = gp_of(text)
    stripped = GroundProgram(gp.rules, gp.universe, frozenset(), gp.ground_ops)
    return [set(m) for m in stable_models(stripped)]


RANDOM_PROGRAM_POOL = [
    "{a}. {b}. c :- a, not b. :- c, b.",
    "{a}. {b}. {c}. d :- a, b. e :- d, not c. :- e, a, c.",
    "p :- not q. q :- not p. r :- p. r :- q. :- not r.",
    "a :- not b. b :- not a. c :- a. c :- b. d :- c, not e. e :- not d.",
]


@pytest.mark.parametrize("text", RANDOM_PROGRAM_POOL)
def test_every_returned_model_satisfies_every_rule(text):
    gp = gp_of(text)
    for model in _full_models(text):
        for rule in gp.rules:
            assert _satisfies(rule, model), (rule.render(), model)


def test_positive_programs_have_unique_least_model():
    rng = random.Random(1234)
    atoms = ["a", "b", "c", "d", "e"]
    for _ in range(50):
        rules = [f"{rng.choice(atoms)}."]
        for _ in range(rng.randint(1, 6)):
            head = rng.choice(atoms)
            body = rng.sample(atoms, rng.randint(1, 2))
            rules.append(f"{head} :- {', '.join(body)}.")
        text = " ".join(rules)
        models = models_of(text)
        assert len(models) == 1
        # independent least-fixpoint computation
        parsed = [r.split(" :- ") for r in text.split(". ") if r.strip(". ")]
        closure: set[str] = set()
        changed = True
        while changed:
            changed = False
            for parts in parsed:
                head = parts[0].strip(". ")
                body = parts[1].strip(". ").split(", ") if len(parts) > 1 else []
                if head not in closure and all(b in closure for b in body):
                    closure.add(head)
                    changed = True
        assert models[0] == closure


def test_aux_atoms_never_leak_into_models():
    for model in models_of("{a}. {b}. :- a, b."):
        assert not any("'" in atom for atom in model)


def test_ground_ops_deterministic():
    text = "{a}. {b}. c :- a, b. :- not c."
    assert gp_of(text).ground_ops == gp_of(text).ground_ops
