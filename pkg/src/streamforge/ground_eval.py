"""Desk-scale reference semantics: grounding and stable-model enumeration.

This backend trades power for being obviously correct: it grounds the
function-free, aggregate-free fragment bottom-up (a relational join over
derivable atoms) and enumerates stable models by brute force over subsets
of the ground atom universe, checking each candidate against the reduct
(Gelfond-Lifschitz; ``not not`` is kept as a test that never derives).

Unbounded choices ``{a1; ...; ak} :- body`` are rewritten into k rule pairs
``ai :- body, not ai'`` / ``ai' :- body, not ai`` over fresh primed atoms,
which are stripped from returned models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .aspkit.ast import (
    AggregateAtom,
    Arith,
    BuiltinAtom,
    Choice,
    Directive,
    Function,
    Literal,
    Number,
    QuotedString,
    Rule,
    Statement,
    Symbol,
    SymbolicAtom,
    Term,
    Variable,
)
from .aspkit.safety import check_safety

DEFAULT_MAX_GROUND_RULES = 100_000
MAX_UNIVERSE_ATOMS = 24


class GroundingError(Exception):
    """The program cannot be grounded at all (e.g. unsafe or div by zero)."""


class UnsupportedFeature(GroundingError):
    """The program uses syntax outside this backend's fragment."""


class DomainTooLarge(GroundingError):
    """Instantiation exceeded the ground-rule cap."""


class UniverseTooLarge(Exception):
    """More ground atoms than the brute-force enumerator accepts."""


class Interrupted(Exception):
    """Raised by a budget hook to abandon enumeration (timeout)."""


# Ground atoms are canonical strings like "fill(3)"; constants are Python
# ints or strings ("sym:..." prefixes keep symbols and quoted strings apart).
Const = object


@dataclass(frozen=True)
class GroundRule:
    head: Optional[str]
    pos: tuple[str, ...] = ()
    neg: tuple[str, ...] = ()
    nneg: tuple[str, ...] = ()

    def render(self) -> str:
        body = (
            list(self.pos)
            + [f"not {a}" for a in self.neg]
            + [f"not not {a}" for a in self.nneg]
        )
        if self.head is None:
            return ":- " + ", ".join(body) + "."
        if not body:
            return f"{self.head}."
        return f"{self.head} :- " + ", ".join(body) + "."


@dataclass
class GroundProgram:
    rules: list[GroundRule]
    universe: list[str]
    aux_atoms: frozenset[str] = field(default_factory=frozenset)
    ground_ops: int = 0  # match attempts spent instantiating; deterministic

    def render(self) -> str:
        return "\n".join(r.render() for r in self.rules) + ("\n" if self.rules else "")


# ---------------------------------------------------------------------------
# Term evaluation


def _const_of(term: Term) -> object:
    if isinstance(term, Number):
        return term.value
    if isinstance(term, Symbol):
        return "s:" + term.name
    if isinstance(term, QuotedString):
        return "q:" + term.text
    raise UnsupportedFeature(f"unsupported constant term '{term}'")


def _render_const(value: object) -> str:
    if isinstance(value, int):
        return str(value)
    assert isinstance(value, str)
    if value.startswith("s:"):
        return value[2:]
    text = value[2:].replace("\\", "\\\\").replace('"', '\\"')
    return f'"{text}"'


def _eval_term(term: Term, bindings: dict[str, object]) -> object:
    if isinstance(term, Variable):
        if term.is_anonymous:
            raise UnsupportedFeature("'_' is only supported in positive body atoms")
        return bindings[term.name]
    if isinstance(term, Arith):
        left = _eval_term(term.left, bindings)
        right = _eval_term(term.right, bindings)
        if not isinstance(left, int) or not isinstance(right, int):
            raise GroundingError(f"arithmetic over non-integer value in '{term}'")
        if term.op == "+":
            return left + right
        if term.op == "-":
            return left - right
        if term.op == "*":
            return left * right
        if right == 0:
            raise GroundingError(f"division by zero in '{term}'")
        return int(left / right)  # C-style truncation, as the solver does
    if isinstance(term, Function):
        raise UnsupportedFeature(f"function term '{term}' (function-free backend)")
    return _const_of(term)


_TYPE_RANK = {int: 0}


def _order_key(value: object) -> tuple[int, object]:
    if isinstance(value, int):
        return (0, value)
    assert isinstance(value, str)
    return (1, value) if value.startswith("s:") else (2, value)


def _compare(left: object, op: str, right: object) -> bool:
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    lk, rk = _order_key(left), _order_key(right)
    if op == "<":
        return lk < rk
    if op == "<=":
        return lk <= rk
    if op == ">":
        return lk > rk
    return lk >= rk


def _atom_key(predicate: str, args: tuple[object, ...]) -> str:
    if not args:
        return predicate
    return f"{predicate}({','.join(_render_const(a) for a in args)})"


# ---------------------------------------------------------------------------
# Grounder


def _collect_const_directives(statements: Iterable[Statement]) -> dict[str, int]:
    import re

    consts: dict[str, int] = {}
    for s in statements:
        if isinstance(s, Directive) and s.name == "const":
            m = re.match(r"#const\s+([a-z][A-Za-z0-9_']*)\s*=\s*(-?\d+)\s*\.", s.text)
            if m is None:
                raise UnsupportedFeature(f"cannot interpret directive: {s.text!r}")
            consts[m.group(1)] = int(m.group(2))
    return consts


def _subst_consts(term: Term, consts: dict[str, int]) -> Term:
    if isinstance(term, Symbol) and term.name in consts:
        return Number(consts[term.name])
    if isinstance(term, Arith):
        return Arith(
            term.op, _subst_consts(term.left, consts), _subst_consts(term.right, consts)
        )
    return term


class _Grounder:
    def __init__(self, rules: list[Rule], consts: dict[str, int], max_rules: int):
        self.rules = rules
        self.consts = consts
        self.max_rules = max_rules
        # (predicate, arity) -> list of argument tuples, in derivation order
        self.known: dict[tuple[str, int], list[tuple[object, ...]]] = {}
        self.known_set: set[str] = set()
        self.out: list[tuple] = []  # ("rule", head,pos,neg,nn) | ("choice", elems, pos,neg,nn)
        self.seen: set = set()
        self.attempts = 0

    # -- pattern matching ----------------------------------------------------

    def _match_positive(
        self, atom: SymbolicAtom, bindings: dict[str, object]
    ) -> Iterable[dict[str, object]]:
        rows = self.known.get((atom.predicate, len(atom.args)), ())
        for row in rows:
            self.attempts += 1
            if self.attempts > 50 * self.max_rules:
                raise DomainTooLarge(
                    f"instantiation aborted after {self.attempts} match attempts"
                )
            new = dict(bindings)
            if self._unify(atom.args, row, new):
                yield new

    def _unify(
        self, pattern: tuple[Term, ...], row: tuple[object, ...], bindings: dict[str, object]
    ) -> bool:
        for term, value in zip(pattern, row):
            if isinstance(term, Variable):
                if term.is_anonymous:
                    continue
                bound = bindings.get(term.name)
                if bound is None:
                    bindings[term.name] = value
                elif bound != value:
                    return False
            elif isinstance(term, Arith):
                if not self._match_arith(term, value, bindings):
                    return False
            else:
                if _const_of(term) != value:
                    return False
        return True

    def _match_arith(self, term: Arith, value: object, bindings: dict[str, object]) -> bool:
        free = _free_arith_vars(term, bindings)
        if not free:
            return _eval_term(term, bindings) == value
        # Invert the single-unknown var+const / const+var / var-const shapes.
        if not isinstance(value, int):
            return False
        solved = _invert_arith(term, value, bindings)
        if solved is None:
            raise UnsupportedFeature(
                f"cannot solve arithmetic match '{term}' during instantiation"
            )
        name, solution = solved
        bindings[name] = solution
        return _eval_term(term, bindings) == value

    def _ordered_positives(
        self, literals: list[Literal], pre_bound: set[str]
    ) -> list[SymbolicAtom]:
        pending = [l.atom for l in literals]
        bound = set(pre_bound)
        ordered: list[SymbolicAtom] = []
        while pending:
            progressed = False
            for atom in list(pending):
                assert isinstance(atom, SymbolicAtom)
                if _atom_ready(atom, bound):
                    ordered.append(atom)
                    pending.remove(atom)
                    bound.update(_plain_vars(atom))
                    bound.update(_arith_vars(atom))
                    progressed = True
                    break
            if not progressed:
                raise UnsupportedFeature(
                    "cannot order body literals for instantiation (mutual arithmetic)"
                )
        return ordered

    def _solutions(
        self, positives: list[Literal], base: dict[str, object]
    ) -> Iterable[dict[str, object]]:
        ordered = self._ordered_positives(positives, set(base))
        stack = [dict(base)]
        for atom in ordered:
            stack = [new for b in stack for new in self._match_positive(atom, b)]
            if not stack:
                return []
        return stack

    # -- rule instantiation ----------------------------------------------------

    def _ground_literal_args(
        self, atom: SymbolicAtom, bindings: dict[str, object]
    ) -> str:
        args = tuple(_eval_term(t, bindings) for t in atom.args)
        return _atom_key(atom.predicate, args)

    def _instantiate(self, rule: Rule) -> bool:
        """Instantiate one rule against the current known atoms.

        Returns True when a new ground instance or atom was produced.
        """
        positives = [
            l
            for l in rule.body
            if l.is_positive and isinstance(l.atom, SymbolicAtom)
        ]
        others = [l for l in rule.body if l not in positives]
        changed = False
        for bindings in self._solutions(positives, {}):
            ok = True
            neg: list[str] = []
            nneg: list[str] = []
            pos: list[str] = [
                self._ground_literal_args(l.atom, bindings) for l in positives
            ]
            for lit in others:
                atom = lit.atom
                if isinstance(atom, BuiltinAtom):
                    left = _eval_term(atom.left, bindings)
                    right = _eval_term(atom.right, bindings)
                    holds = _compare(left, atom.op, right)
                    if lit.negations % 2 == 1:
                        holds = not holds
                    if not holds:
                        ok = False
                        break
                elif isinstance(atom, SymbolicAtom):
                    key = self._ground_literal_args(atom, bindings)
                    if lit.negations == 1:
                        neg.append(key)
                    else:
                        nneg.append(key)
                else:
                    raise UnsupportedFeature("aggregates are not supported by this backend")
            if not ok:
                continue
            changed |= self._emit(rule, bindings, pos, neg, nneg)
        return changed

    def _emit(
        self,
        rule: Rule,
        bindings: dict[str, object],
        pos: list[str],
        neg: list[str],
        nneg: list[str],
    ) -> bool:
        if isinstance(rule.head, SymbolicAtom):
            head = self._ground_head_atom(rule.head, bindings)
            item = ("rule", head, tuple(pos), tuple(neg), tuple(nneg))
            return self._push(item, [head])
        if isinstance(rule.head, Choice):
            elements: list[tuple[str, tuple[str, ...], tuple[str, ...], tuple[str, ...]]] = []
            new_atoms: list[str] = []
            for element in rule.head.elements:
                for ground in self._ground_choice_element(element, bindings):
                    elements.append(ground)
                    new_atoms.append(ground[0])
            if not elements:
                return False
            item = ("choice", tuple(elements), tuple(pos), tuple(neg), tuple(nneg))
            return self._push(item, new_atoms)
        item = ("rule", None, tuple(pos), tuple(neg), tuple(nneg))
        return self._push(item, [])

    def _ground_choice_element(self, element, bindings: dict[str, object]):
        cond_pos = [
            l
            for l in element.condition
            if l.is_positive and isinstance(l.atom, SymbolicAtom)
        ]
        cond_rest = [l for l in element.condition if l not in cond_pos]
        for extended in self._solutions(cond_pos, bindings):
            ok = True
            extra_pos = [self._ground_literal_args(l.atom, extended) for l in cond_pos]
            extra_neg: list[str] = []
            extra_nneg: list[str] = []
            for lit in cond_rest:
                atom = lit.atom
                if isinstance(atom, BuiltinAtom):
                    holds = _compare(
                        _eval_term(atom.left, extended),
                        atom.op,
                        _eval_term(atom.right, extended),
                    )
                    if lit.negations % 2 == 1:
                        holds = not holds
                    if not holds:
                        ok = False
                        break
                else:
                    key = self._ground_literal_args(atom, extended)
                    (extra_neg if lit.negations == 1 else extra_nneg).append(key)
            if not ok:
                continue
            atom_key = self._ground_head_atom(element.atom, extended)
            yield (atom_key, tuple(extra_pos), tuple(extra_neg), tuple(extra_nneg))

    def _ground_head_atom(self, atom: SymbolicAtom, bindings: dict[str, object]) -> str:
        args = tuple(_eval_term(t, bindings) for t in atom.args)
        key = _atom_key(atom.predicate, args)
        if key not in self.known_set:
            self.known_set.add(key)
            self.known.setdefault((atom.predicate, len(args)), []).append(args)
        return key

    def _push(self, item: tuple, head_atoms: list[str]) -> bool:
        if item in self.seen:
            return False
        self.seen.add(item)
        self.out.append(item)
        if len(self.out) > self.max_rules:
            raise DomainTooLarge(
                f"more than {self.max_rules} ground rules (cap configurable)"
            )
        return True

    # -- driver ------------------------------------------------------------------

    def run(self) -> list[tuple]:
        changed = True
        while changed:
            changed = False
            for rule in self.rules:
                if self._instantiate(rule):
                    changed = True
        return self.out


def _plain_vars(atom: SymbolicAtom) -> set[str]:
    out: set[str] = set()
    for t in atom.args:
        if isinstance(t, Variable) and not t.is_anonymous:
            out.add(t.name)
    return out


def _arith_vars(atom: SymbolicAtom) -> set[str]:
    out: set[str] = set()
    for t in atom.args:
        if isinstance(t, Arith):
            _collect_arith_vars(t, out)
    return out


def _collect_arith_vars(term: Term, out: set[str]) -> None:
    if isinstance(term, Variable) and not term.is_anonymous:
        out.add(term.name)
    elif isinstance(term, Arith):
        _collect_arith_vars(term.left, out)
        _collect_arith_vars(term.right, out)


def _free_arith_vars(term: Arith, bindings: dict[str, object]) -> set[str]:
    out: set[str] = set()
    _collect_arith_vars(term, out)
    return {v for v in out if v not in bindings}


def _invert_arith(
    term: Arith, value: int, bindings: dict[str, object]
) -> Optional[tuple[str, int]]:
    free = _free_arith_vars(term, bindings)
    if len(free) != 1 or term.op not in ("+", "-"):
        return None
    left, right = term.left, term.right
    if isinstance(left, Variable) and left.name in free and not isinstance(right, Arith):
        other = _eval_term(right, bindings) if not isinstance(right, Variable) else None
        if isinstance(right, Variable):
            other = bindings.get(right.name)
        if not isinstance(other, int):
            return None
        return (left.name, value - other if term.op == "+" else value + other)
    if isinstance(right, Variable) and right.name in free and not isinstance(left, Arith):
        other = _eval_term(left, bindings) if not isinstance(left, Variable) else None
        if isinstance(left, Variable):
            other = bindings.get(left.name)
        if not isinstance(other, int):
            return None
        return (right.name, value - other if term.op == "+" else other - value)
    return None


def _atom_ready(atom: SymbolicAtom, bound: set[str]) -> bool:
    for t in atom.args:
        if isinstance(t, Arith):
            free = {v for v in _arith_term_vars(t) if v not in bound}
            if len(free) > 1:
                return False
            if len(free) == 1 and not _invertible_shape(t):
                return False
    return True


def _arith_term_vars(term: Term) -> set[str]:
    out: set[str] = set()
    _collect_arith_vars(term, out)
    return out


def _invertible_shape(term: Arith) -> bool:
    if term.op not in ("+", "-"):
        return False
    sides = (term.left, term.right)
    return any(isinstance(s, Variable) for s in sides) and not any(
        isinstance(s, Arith) for s in sides
    )


def _validate_fragment(rule: Rule) -> None:
    if isinstance(rule.head, Choice):
        if rule.head.left_guard is not None or rule.head.right_guard is not None:
            raise UnsupportedFeature("bounded choices are not supported by this backend")
        for element in rule.head.elements:
            for t in element.atom.args:
                _validate_term(t)
            for lit in element.condition:
                _validate_literal(lit)
    elif isinstance(rule.head, SymbolicAtom):
        for t in rule.head.args:
            _validate_term(t)
        if any(isinstance(t, Variable) and t.is_anonymous for t in rule.head.args):
            raise UnsupportedFeature("'_' cannot appear in rule heads")
    for lit in rule.body:
        _validate_literal(lit)


def _validate_literal(lit: Literal) -> None:
    atom = lit.atom
    if isinstance(atom, AggregateAtom):
        raise UnsupportedFeature("aggregates are not supported by this backend")
    if isinstance(atom, SymbolicAtom):
        for t in atom.args:
            _validate_term(t)
        if lit.negations > 0 and any(
            isinstance(t, Variable) and t.is_anonymous for t in atom.args
        ):
            raise UnsupportedFeature("'_' is only supported in positive body atoms")
    else:
        _validate_term(atom.left)
        _validate_term(atom.right)


def _validate_term(term: Term) -> None:
    if isinstance(term, Function):
        raise UnsupportedFeature(f"function term '{term}' (function-free backend)")
    if isinstance(term, Arith):
        _validate_term(term.left)
        _validate_term(term.right)


def ground(
    program: list[Statement], max_rules: int = DEFAULT_MAX_GROUND_RULES
) -> GroundProgram:
    """Ground a safe, function-free, aggregate-free program.

    ``#const`` directives are substituted, ``#show`` lines ignored. Choice
    rules are rewritten after instantiation; negative literals over atoms
    that can never be derived are simplified away.
    """
    consts = _collect_const_directives(program)
    rules: list[Rule] = []
    for s in program:
        if isinstance(s, Directive):
            if s.name not in ("const", "show"):
                raise UnsupportedFeature(f"directive '#{s.name}' not supported")
            continue
        rule = _rewrite_consts(s, consts)
        violations = check_safety(rule)
        if violations:
            raise GroundingError(f"unsafe rule '{rule}': {violations[0]}")
        _validate_fragment(rule)
        rules.append(rule)

    grounder = _Grounder(rules, consts, max_rules)
    raw = grounder.run()
    derivable = set(grounder.known_set)

    # Rewrite choices, inventing primed aux atoms that are fresh by construction.
    aux_atoms: set[str] = set()
    expanded: list[GroundRule] = []
    for item in raw:
        if item[0] == "rule":
            _, head, pos, neg, nneg = item
            expanded.append(GroundRule(head, pos, neg, nneg))
            continue
        _, elements, pos, neg, nneg = item
        for atom_key, extra_pos, extra_neg, extra_nneg in elements:
            aux = _fresh_aux(atom_key, derivable, aux_atoms)
            aux_atoms.add(aux)
            base_pos = pos + extra_pos
            base_neg = neg + extra_neg
            base_nneg = nneg + extra_nneg
            expanded.append(GroundRule(atom_key, base_pos, base_neg + (aux,), base_nneg))
            expanded.append(GroundRule(aux, base_pos, base_neg + (atom_key,), base_nneg))

    derivable |= aux_atoms
    simplified: list[GroundRule] = []
    for rule in expanded:
        neg = tuple(a for a in rule.neg if a in derivable)
        if any(a not in derivable for a in rule.nneg):
            continue  # 'not not a' can never hold
        if any(a not in derivable for a in rule.pos):
            continue  # body can never hold
        simplified.append(GroundRule(rule.head, rule.pos, neg, rule.nneg))

    universe: list[str] = []
    seen: set[str] = set()

    def _see(atom: Optional[str]) -> None:
        if atom is not None and atom not in seen:
            seen.add(atom)
            universe.append(atom)

    for rule in simplified:
        _see(rule.head)
        for a in rule.pos:
            _see(a)
        for a in rule.neg:
            _see(a)
        for a in rule.nneg:
            _see(a)

    return GroundProgram(
        rules=simplified,
        universe=universe,
        aux_atoms=frozenset(aux_atoms),
        ground_ops=grounder.attempts,
    )


def _rewrite_consts(rule: Rule, consts: dict[str, int]) -> Rule:
    if not consts:
        return rule
    from .aspkit.ast import AggregateElement, ChoiceElement

    def fix_atom(atom):
        if isinstance(atom, SymbolicAtom):
            return SymbolicAtom(
                atom.predicate, tuple(_subst_consts(t, consts) for t in atom.args)
            )
        if isinstance(atom, BuiltinAtom):
            return BuiltinAtom(
                _subst_consts(atom.left, consts), atom.op, _subst_consts(atom.right, consts)
            )
        return AggregateAtom(
            atom.function,
            tuple(
                AggregateElement(
                    tuple(_subst_consts(t, consts) for t in e.terms),
                    tuple(Literal(fix_atom(l.atom), l.negations) for l in e.condition),
                )
                for e in atom.elements
            ),
            atom.left_guard,
            atom.right_guard,
        )

    def fix_head(head):
        if head is None:
            return None
        if isinstance(head, SymbolicAtom):
            return fix_atom(head)
        return Choice(
            tuple(
                ChoiceElement(
                    fix_atom(e.atom),
                    tuple(Literal(fix_atom(l.atom), l.negations) for l in e.condition),
                )
                for e in head.elements
            ),
            head.left_guard,
            head.right_guard,
        )

    return Rule(
        head=fix_head(rule.head),
        body=tuple(Literal(fix_atom(l.atom), l.negations) for l in rule.body),
        source_span=rule.source_span,
    )


def _fresh_aux(atom_key: str, derivable: set[str], aux: set[str]) -> str:
    if "(" in atom_key:
        pred, rest = atom_key.split("(", 1)
        candidate = f"{pred}'({rest}"
        while candidate in derivable or candidate in aux:
            pred += "'"
            candidate = f"{pred}'({rest}"
        return candidate
    candidate = atom_key + "'"
    while candidate in derivable or candidate in aux:
        candidate += "'"
    return candidate


# ---------------------------------------------------------------------------
# Brute-force stable models


class OpBudget:
    """Charge hook for enumeration work; ``check`` may raise Interrupted."""

    def charge(self, ops: int) -> None:  # pragma: no cover - interface default
        pass

    def check(self) -> None:  # pragma: no cover - interface default
        pass


def stable_models(
    gp: GroundProgram,
    model_cap: Optional[int] = None,
    budget: Optional[OpBudget] = None,
) -> list[frozenset[str]]:
    """Enumerate stable models in canonical (universe bitmask) order.

    Atoms forced by definite rules are pinned up front; the remaining atoms
    are enumerated exhaustively. Choice-auxiliary atoms are stripped from
    the returned models.
    """
    n = len(gp.universe)
    if n > MAX_UNIVERSE_ATOMS:
        raise UniverseTooLarge(
            f"{n} ground atoms exceed the {MAX_UNIVERSE_ATOMS}-atom brute-force bound"
        )
    index = {atom: i for i, atom in enumerate(gp.universe)}

    # Definite (negation-free) closure: present in every stable model.
    pinned = 0
    definite = [
        (index[r.head], sum(1 << index[a] for a in r.pos))
        for r in gp.rules
        if r.head is not None and not r.neg and not r.nneg
    ]
    changed = True
    while changed:
        changed = False
        for head_bit, pos_mask in definite:
            if pinned & (1 << head_bit) == 0 and pinned & pos_mask == pos_mask:
                pinned |= 1 << head_bit
                changed = True

    free_bits = [i for i in range(n) if pinned >> i & 1 == 0]
    f = len(free_bits)

    # Compile rules into masks over the free-bit space, resolving pinned atoms.
    def compile_mask(atoms: tuple[str, ...]) -> Optional[int]:
        mask = 0
        for a in atoms:
            i = index[a]
            if pinned >> i & 1:
                continue
            mask |= 1 << free_bits.index(i)
        return mask

    free_pos = {i: j for j, i in enumerate(free_bits)}

    constraints: list[tuple[int, int, int]] = []
    head_rules: list[tuple[int, int, int, int]] = []  # (head_bit_or_-1, pos, neg, nn)
    support_rules: list[tuple[int, int, int, int]] = []
    for r in gp.rules:
        skip = False
        pos = neg = nn = 0
        for a in r.pos:
            i = index[a]
            if pinned >> i & 1 == 0:
                pos |= 1 << free_pos[i]
        for a in r.neg:
            i = index[a]
            if pinned >> i & 1:
                skip = True  # 'not a' with a always true: body never holds
                break
            neg |= 1 << free_pos[i]
        if skip:
            continue
        for a in r.nneg:
            i = index[a]
            if pinned >> i & 1 == 0:
                nn |= 1 << free_pos[i]
        if r.head is None:
            constraints.append((pos, neg, nn))
            continue
        hi = index[r.head]
        if pinned >> hi & 1:
            continue  # head always true: satisfied, and support is covered
        head_bit = 1 << free_pos[hi]
        head_rules.append((head_bit, pos, neg, nn))
        support_rules.append((head_bit, pos, neg, nn))

    models: list[frozenset[str]] = []
    ops = 0
    check_every = 256
    budget = budget or OpBudget()

    for c in range(1 << f):
        if c % check_every == 0:
            budget.charge(ops)
            ops = 0
            budget.check()
        # Constraints first: a violated constraint is the cheapest rejection.
        rejected = False
        for pos, neg, nn in constraints:
            ops += 1
            if c & pos == pos and c & neg == 0 and c & nn == nn:
                rejected = True
                break
        if rejected:
            continue
        for head_bit, pos, neg, nn in head_rules:
            ops += 1
            if c & pos == pos and c & neg == 0 and c & nn == nn and c & head_bit == 0:
                rejected = True
                break
        if rejected:
            continue
        # Reduct least model must reproduce the candidate exactly.
        applicable = []
        for head_bit, pos, neg, nn in support_rules:
            ops += 1
            if c & neg == 0 and c & nn == nn:
                applicable.append((head_bit, pos))
        closure = 0
        changed = True
        while changed:
            changed = False
            for head_bit, pos in applicable:
                ops += 1
                if closure & head_bit == 0 and closure & pos == pos:
                    closure |= head_bit
                    changed = True
        if closure != c:
            continue
        full = pinned
        for j, i in enumerate(free_bits):
            if c >> j & 1:
                full |= 1 << i
        models.append(
            frozenset(
                gp.universe[i]
                for i in range(n)
                if full >> i & 1 and gp.universe[i] not in gp.aux_atoms
            )
        )
        if model_cap is not None and len(models) >= model_cap:
            break

    budget.charge(ops)
    return models


def check_sat(program: list[Statement], budget: Optional[OpBudget] = None) -> str:
    """SAT iff the program has at least one stable model."""
    gp = ground(program)
    return "SAT" if stable_models(gp, model_cap=1, budget=budget) else "UNSAT"
