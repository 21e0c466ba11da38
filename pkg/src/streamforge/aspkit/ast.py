"""AST node types for the supported ASP fragment, plus the canonical printer.

The node classes are frozen dataclasses so parsed programs hash and compare
structurally; a rule's source span is excluded from comparison so that
round-tripping through :func:`format_statement` yields an equal tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

COMPARISON_OPS = ("<", "<=", ">=", ">", "=", "!=")
ARITH_OPS = ("+", "-", "*", "/")
AGGREGATE_FUNCTIONS = ("count", "sum", "min", "max")


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Number:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Symbol:
    """A symbolic constant (lowercase-initial token)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class QuotedString:
    text: str

    def __str__(self) -> str:
        escaped = self.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


@dataclass(frozen=True)
class Infimum:
    def __str__(self) -> str:
        return "#inf"


@dataclass(frozen=True)
class Supremum:
    def __str__(self) -> str:
        return "#sup"


@dataclass(frozen=True)
class Variable:
    name: str

    @property
    def is_anonymous(self) -> bool:
        return self.name == "_"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Function:
    """A compound term f(t1,...,tn) with n >= 1."""

    name: str
    args: tuple["Term", ...]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(str(a) for a in self.args)})"


@dataclass(frozen=True)
class Arith:
    """A binary arithmetic expression over integers and variables."""

    op: str
    left: "Term"
    right: "Term"

    def __str__(self) -> str:
        return f"({self._fmt(self.left)}{self.op}{self._fmt(self.right)})"

    @staticmethod
    def _fmt(t: "Term") -> str:
        return str(t)


Term = Union[Number, Symbol, QuotedString, Infimum, Supremum, Variable, Function, Arith]


# ---------------------------------------------------------------------------
# Atoms and literals


@dataclass(frozen=True)
class SymbolicAtom:
    predicate: str
    args: tuple[Term, ...] = ()

    @property
    def signature(self) -> tuple[str, int]:
        return (self.predicate, len(self.args))

    def __str__(self) -> str:
        return format_atom(self)


@dataclass(frozen=True)
class BuiltinAtom:
    left: Term
    op: str
    right: Term

    def __str__(self) -> str:
        return format_atom(self)


@dataclass(frozen=True)
class AggregateElement:
    """``t1,...,tn : l1,...,lm`` inside an aggregate atom."""

    terms: tuple[Term, ...]
    condition: tuple["Literal", ...] = ()


@dataclass(frozen=True)
class AggregateAtom:
    """``t1 op1 #fn { e1; ...; ek } op2 t2`` with optional guards.

    An omitted guard means "<=" against #inf (left) or #sup (right); guards
    are stored as written so the printer can reproduce the original shape.
    """

    function: str
    elements: tuple[AggregateElement, ...]
    left_guard: Optional[tuple[Term, str]] = None
    right_guard: Optional[tuple[str, Term]] = None

    def __str__(self) -> str:
        return format_atom(self)


Atom = Union[SymbolicAtom, BuiltinAtom, AggregateAtom]


@dataclass(frozen=True)
class Literal:
    """An atom under 0, 1, or 2 ``not``."""

    atom: Atom
    negations: int = 0

    @property
    def is_positive(self) -> bool:
        return self.negations == 0

    def __str__(self) -> str:
        return format_literal(self)


# ---------------------------------------------------------------------------
# Rule heads and statements


@dataclass(frozen=True)
class ChoiceElement:
    atom: SymbolicAtom
    condition: tuple[Literal, ...] = ()


@dataclass(frozen=True)
class Choice:
    elements: tuple[ChoiceElement, ...]
    left_guard: Optional[tuple[Term, str]] = None
    right_guard: Optional[tuple[str, Term]] = None

    def __str__(self) -> str:
        return format_head(self)


Head = Union[SymbolicAtom, Choice]


@dataclass(frozen=True)
class Rule:
    """A rule; ``head is None`` makes it an integrity constraint."""

    head: Optional[Head]
    body: tuple[Literal, ...] = ()
    source_span: tuple[int, int] = field(default=(0, 0), compare=False)

    @property
    def is_constraint(self) -> bool:
        return self.head is None

    @property
    def is_fact(self) -> bool:
        return self.head is not None and not self.body

    def __str__(self) -> str:
        return format_statement(self)


@dataclass(frozen=True)
class Directive:
    """An opaque ``#const``/``#show`` line, retained verbatim."""

    name: str
    text: str
    source_span: tuple[int, int] = field(default=(0, 0), compare=False)

    def __str__(self) -> str:
        return self.text


Statement = Union[Rule, Directive]


@dataclass(frozen=True)
class ParseError:
    message: str
    line: int
    column: int
    offset: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


# ---------------------------------------------------------------------------
# Canonical printer
#
# Single space after commas and ":-", "; " between brace elements, no line
# wrapping. parse(format(parse(text))) is structurally equal to parse(text).


def format_term(t: Term) -> str:
    return _term_str(t, top=True)


def _term_str(t: Term, top: bool = False) -> str:
    if isinstance(t, Arith):
        inner = f"{_term_str(t.left)}{t.op}{_term_str(t.right)}"
        return inner if top else f"({inner})"
    if isinstance(t, Function):
        return f"{t.name}({', '.join(_term_str(a, top=True) for a in t.args)})"
    return str(t)


def format_atom(a: Atom) -> str:
    if isinstance(a, SymbolicAtom):
        if not a.args:
            return a.predicate
        return f"{a.predicate}({', '.join(format_term(t) for t in a.args)})"
    if isinstance(a, BuiltinAtom):
        return f"{format_term(a.left)} {a.op} {format_term(a.right)}"
    parts = []
    if a.left_guard is not None:
        term, op = a.left_guard
        parts.append(f"{format_term(term)} {op} ")
    elements = "; ".join(_format_aggregate_element(e) for e in a.elements)
    parts.append(f"#{a.function} {{ {elements} }}")
    if a.right_guard is not None:
        op, term = a.right_guard
        parts.append(f" {op} {format_term(term)}")
    return "".join(parts)


def _format_aggregate_element(e: AggregateElement) -> str:
    terms = ", ".join(format_term(t) for t in e.terms)
    if not e.condition:
        return terms
    cond = ", ".join(format_literal(l) for l in e.condition)
    return f"{terms} : {cond}"


def format_literal(l: Literal) -> str:
    return "not " * l.negations + format_atom(l.atom)


def format_head(h: Head) -> str:
    if isinstance(h, SymbolicAtom):
        return format_atom(h)
    parts = []
    if h.left_guard is not None:
        term, op = h.left_guard
        parts.append(f"{format_term(term)} {op} ")
    elements = "; ".join(_format_choice_element(e) for e in h.elements)
    parts.append(f"{{ {elements} }}")
    if h.right_guard is not None:
        op, term = h.right_guard
        parts.append(f" {op} {format_term(term)}")
    return "".join(parts)


def _format_choice_element(e: ChoiceElement) -> str:
    if not e.condition:
        return format_atom(e.atom)
    cond = ", ".join(format_literal(l) for l in e.condition)
    return f"{format_atom(e.atom)} : {cond}"


def format_statement(s: Statement) -> str:
    if isinstance(s, Directive):
        return s.text
    body = ", ".join(format_literal(l) for l in s.body)
    if s.head is None:
        return f":- {body}."
    if not s.body:
        return f"{format_head(s.head)}."
    return f"{format_head(s.head)} :- {body}."


def format_program(statements: list[Statement]) -> str:
    return "\n".join(format_statement(s) for s in statements) + ("\n" if statements else "")
