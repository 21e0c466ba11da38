"""Parsing, safety checking, classification, and composition of ASP text."""

from .ast import (
    AggregateAtom,
    AggregateElement,
    Arith,
    Atom,
    BuiltinAtom,
    Choice,
    ChoiceElement,
    Directive,
    Function,
    Head,
    Infimum,
    Literal,
    Number,
    ParseError,
    QuotedString,
    Rule,
    Statement,
    Supremum,
    Symbol,
    SymbolicAtom,
    Term,
    Variable,
    format_atom,
    format_literal,
    format_program,
    format_statement,
    format_term,
)
from .parser import parse_program, parse_rules
from .safety import SafetyViolation, check_program_safety, check_safety
from .snippets import (
    KIND_COMMENT_ONLY,
    KIND_CONSTRAINT_ONLY,
    KIND_RULES_AND_CONSTRAINTS,
    KIND_UNPARSEABLE,
    CompositionError,
    Snippet,
    classify_snippet,
    compose,
)

__all__ = [
    "AggregateAtom",
    "AggregateElement",
    "Arith",
    "Atom",
    "BuiltinAtom",
    "Choice",
    "ChoiceElement",
    "CompositionError",
    "Directive",
    "Function",
    "Head",
    "Infimum",
    "KIND_COMMENT_ONLY",
    "KIND_CONSTRAINT_ONLY",
    "KIND_RULES_AND_CONSTRAINTS",
    "KIND_UNPARSEABLE",
    "Literal",
    "Number",
    "ParseError",
    "QuotedString",
    "Rule",
    "SafetyViolation",
    "Snippet",
    "Statement",
    "Supremum",
    "Symbol",
    "SymbolicAtom",
    "Term",
    "Variable",
    "check_program_safety",
    "check_safety",
    "classify_snippet",
    "compose",
    "format_atom",
    "format_literal",
    "format_program",
    "format_statement",
    "format_term",
    "parse_program",
    "parse_rules",
]
