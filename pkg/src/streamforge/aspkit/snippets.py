"""Snippet classification and deterministic encoding composition."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .ast import ParseError, Rule, Statement
from .parser import parse_program

KIND_CONSTRAINT_ONLY = "constraint-only"
KIND_RULES_AND_CONSTRAINTS = "rules-and-constraints"
KIND_COMMENT_ONLY = "comment-only"
KIND_UNPARSEABLE = "unparseable"


class CompositionError(Exception):
    """The base encoding itself does not parse."""


@dataclass
class Snippet:
    raw_text: str
    parsed: list[Statement] = field(default_factory=list)
    errors: list[ParseError] = field(default_factory=list)
    kind: str = KIND_UNPARSEABLE

    @property
    def is_usable(self) -> bool:
        return self.kind != KIND_UNPARSEABLE


def classify_snippet(text: str) -> Snippet:
    """Parse a snippet and label it.

    comment-only covers text that parses to nothing and is either pure
    whitespace or contains only ``%`` comments; such snippets are still
    valid candidates, they just cannot change solver behaviour.
    """
    statements, errors = parse_program(text)
    if errors:
        kind = KIND_UNPARSEABLE
    elif not statements:
        kind = KIND_COMMENT_ONLY if ("%" in text or text.strip() == "") else KIND_UNPARSEABLE
    elif all(isinstance(s, Rule) and s.is_constraint for s in statements):
        kind = KIND_CONSTRAINT_ONLY
    else:
        kind = KIND_RULES_AND_CONSTRAINTS
    return Snippet(raw_text=text, parsed=statements, errors=errors, kind=kind)


def compose(
    encoding: str,
    snippets: Sequence[Snippet],
    ids: Optional[Sequence[str]] = None,
) -> str:
    """Append snippets to an encoding, each under a marker comment line.

    Byte-deterministic: equal inputs yield identical output. The snippets'
    raw text is preserved verbatim between markers.
    """
    _, errors = parse_program(encoding)
    if errors:
        raise CompositionError(f"encoding does not parse: {errors[0]}")
    if ids is None:
        ids = [str(i + 1) for i in range(len(snippets))]
    if len(ids) != len(snippets):
        raise ValueError("ids and snippets must have equal length")
    parts = [encoding if encoding.endswith("\n") else encoding + "\n"]
    for snippet_id, snippet in zip(ids, snippets):
        parts.append(f"% --- streamliner {snippet_id} ---\n")
        text = snippet.raw_text
        parts.append(text if text.endswith("\n") else text + "\n")
    return "".join(parts)
