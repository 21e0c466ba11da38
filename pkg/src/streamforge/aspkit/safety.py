"""Rule safety: every variable needs a binding occurrence in a positive atom.

A variable is bound when it occurs in a positive (un-negated) symbolic body
literal, either outside any arithmetic expression or inside a solvable one:
a +/- expression over a single distinct variable (``T-1``, ``U+1``) binds
that variable, since the grounder can invert it during matching. Aggregate
and choice elements open a local scope: their variables may additionally be
bound by positive symbolic literals of the element's own condition, and
variables occurring only inside an element never leak a binding to the rest
of the rule. The anonymous variable ``_`` is exempt.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    AggregateAtom,
    Arith,
    BuiltinAtom,
    Choice,
    Function,
    Literal,
    Rule,
    SymbolicAtom,
    Term,
    Variable,
)


@dataclass(frozen=True)
class SafetyViolation:
    variable: str
    message: str

    def __str__(self) -> str:
        return self.message


def _binding_vars(term: Term, out: list[str]) -> None:
    if isinstance(term, Variable):
        if not term.is_anonymous:
            out.append(term.name)
    elif isinstance(term, Function):
        for arg in term.args:
            _binding_vars(arg, out)
    elif isinstance(term, Arith):
        # Only a single-variable +/- expression is invertible by matching.
        names: list[str] = []
        _all_vars(term, names)
        if len(set(names)) == 1 and _additive_only(term):
            out.append(names[0])


def _additive_only(term: Term) -> bool:
    if isinstance(term, Arith):
        return term.op in ("+", "-") and _additive_only(term.left) and _additive_only(term.right)
    return True


def _all_vars(term: Term, out: list[str]) -> None:
    if isinstance(term, Variable):
        if not term.is_anonymous:
            out.append(term.name)
    elif isinstance(term, Function):
        for arg in term.args:
            _all_vars(arg, out)
    elif isinstance(term, Arith):
        _all_vars(term.left, out)
        _all_vars(term.right, out)


def _condition_bound(condition: tuple[Literal, ...]) -> list[str]:
    bound: list[str] = []
    for lit in condition:
        if lit.is_positive and isinstance(lit.atom, SymbolicAtom):
            for arg in lit.atom.args:
                _binding_vars(arg, bound)
    return bound


def _condition_vars(condition: tuple[Literal, ...]) -> list[str]:
    seen: list[str] = []
    for lit in condition:
        if isinstance(lit.atom, SymbolicAtom):
            for arg in lit.atom.args:
                _all_vars(arg, seen)
        elif isinstance(lit.atom, BuiltinAtom):
            _all_vars(lit.atom.left, seen)
            _all_vars(lit.atom.right, seen)
    return seen


def check_safety(rule: Rule) -> list[SafetyViolation]:
    """Return one violation per unsafe variable; an empty list means safe."""
    bound: set[str] = set()
    for lit in rule.body:
        if lit.is_positive and isinstance(lit.atom, SymbolicAtom):
            names: list[str] = []
            for arg in lit.atom.args:
                _binding_vars(arg, names)
            bound.update(names)

    # (variable, element scope or None) occurrences, in source order.
    needed: list[tuple[str, tuple[str, ...]]] = []

    def need_global(names: list[str]) -> None:
        for name in names:
            needed.append((name, ()))

    def need_element(names: list[str], local_bound: list[str]) -> None:
        local = tuple(sorted(set(local_bound)))
        for name in names:
            needed.append((name, local))

    if isinstance(rule.head, SymbolicAtom):
        names: list[str] = []
        for arg in rule.head.args:
            _all_vars(arg, names)
        need_global(names)
    elif isinstance(rule.head, Choice):
        for guard in (rule.head.left_guard, rule.head.right_guard):
            if guard is not None:
                term = guard[0] if isinstance(guard[1], str) else guard[1]
                names = []
                _all_vars(term, names)
                need_global(names)
        for element in rule.head.elements:
            local_bound = _condition_bound(element.condition)
            names = []
            for arg in element.atom.args:
                _all_vars(arg, names)
            names.extend(_condition_vars(element.condition))
            need_element(names, local_bound)

    for lit in rule.body:
        atom = lit.atom
        if isinstance(atom, SymbolicAtom):
            names = []
            for arg in atom.args:
                _all_vars(arg, names)
            need_global(names)
        elif isinstance(atom, BuiltinAtom):
            names = []
            _all_vars(atom.left, names)
            _all_vars(atom.right, names)
            need_global(names)
        elif isinstance(atom, AggregateAtom):
            for guard in (atom.left_guard, atom.right_guard):
                if guard is not None:
                    term = guard[0] if isinstance(guard[1], str) else guard[1]
                    names = []
                    _all_vars(term, names)
                    need_global(names)
            for element in atom.elements:
                local_bound = _condition_bound(element.condition)
                names = []
                for term in element.terms:
                    _all_vars(term, names)
                names.extend(_condition_vars(element.condition))
                need_element(names, local_bound)

    violations: list[SafetyViolation] = []
    reported: set[str] = set()
    for name, local in needed:
        if name in reported or name in bound or name in local:
            continue
        reported.add(name)
        violations.append(
            SafetyViolation(
                variable=name,
                message=f"variable '{name}' has no positive occurrence in a symbolic body atom",
            )
        )
    return violations


def check_program_safety(rules: list[Rule]) -> list[tuple[Rule, SafetyViolation]]:
    out: list[tuple[Rule, SafetyViolation]] = []
    for rule in rules:
        for violation in check_safety(rule):
            out.append((rule, violation))
    return out
