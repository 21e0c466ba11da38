"""Tokenizer and recursive-descent parser for the supported ASP fragment.

Covers normal rules, integrity constraints, choice rules with guards,
#count/#sum/#min/#max aggregates with guards, builtin comparisons,
arithmetic terms, strings, #inf/#sup, and ``not``/``not not`` literals.
``#const`` and ``#show`` lines are retained as opaque directives.

Parsing never raises for malformed input: each bad statement yields a
positioned :class:`ParseError` and the parser resumes after the next ``.``
at brace/paren nesting depth zero, so one bad rule cannot mask the rest.
"""

from __future__ import annotations

import re
from typing import Optional

from .ast import (
    AGGREGATE_FUNCTIONS,
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
)

PASSTHROUGH_DIRECTIVES = ("const", "show")

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<COMMENT>%[^\n]*)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<BADSTRING>"(?:[^"\\\n]|\\.)*)
  | (?P<NUMBER>\d+)
  | (?P<IDENT>[a-z][A-Za-z0-9_']*)
  | (?P<VARIABLE>[A-Z_][A-Za-z0-9_']*)
  | (?P<HASH>\#[a-z]+)
  | (?P<COLONDASH>:-)
  | (?P<OP><=|>=|!=|<|>|=)
  | (?P<PUNCT>[.,;:(){}+\-*/])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "value", "offset", "line", "column")

    def __init__(self, kind: str, value: str, offset: int, line: int, column: int):
        self.kind = kind
        self.value = value
        self.offset = offset
        self.line = line
        self.column = column

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.column})"


def tokenize(text: str) -> list[Token]:
    """Scan the whole input; unlexable characters become BAD tokens."""
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            tokens.append(Token("BAD", text[pos], pos, line, pos - line_start + 1))
            pos += 1
            continue
        kind = m.lastgroup or "BAD"
        value = m.group()
        column = pos - line_start + 1
        if kind == "WS":
            nl = value.count("\n")
            if nl:
                line += nl
                line_start = pos + value.rindex("\n") + 1
        elif kind == "COMMENT":
            pass
        elif kind == "BADSTRING":
            tokens.append(Token("BAD", value, pos, line, column))
        elif kind == "PUNCT":
            tokens.append(Token(value, value, pos, line, column))
        elif kind == "OP":
            tokens.append(Token("OP", value, pos, line, column))
        else:
            tokens.append(Token(kind, value, pos, line, column))
        pos = m.end()
    tokens.append(Token("EOF", "", n, line, n - line_start + 1))
    return tokens


class _ParseFailure(Exception):
    def __init__(self, message: str, token: Token):
        super().__init__(message)
        self.message = message
        self.token = token


_TERM_START = {"NUMBER", "IDENT", "VARIABLE", "STRING", "(", "-"}


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.errors: list[ParseError] = []

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise _ParseFailure(f"expected '{kind}', found {self._describe(tok)}", tok)
        return self.next()

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.kind == "EOF":
            return "end of input"
        return f"'{tok.value}'"

    def _fail(self, message: str, tok: Optional[Token] = None) -> _ParseFailure:
        return _ParseFailure(message, tok or self.peek())

    def _record(self, failure: _ParseFailure) -> None:
        tok = failure.token
        self.errors.append(
            ParseError(failure.message, line=tok.line, column=tok.column, offset=tok.offset)
        )

    def _recover(self) -> None:
        """Skip to the '.' closing the current statement at nesting depth 0."""
        depth = 0
        while True:
            tok = self.next()
            if tok.kind == "EOF":
                return
            if tok.kind in ("(", "{"):
                depth += 1
            elif tok.kind in (")", "}"):
                depth = max(0, depth - 1)
            elif tok.kind == "." and depth == 0:
                return

    # -- entry point --------------------------------------------------------

    def parse_program(self) -> list[Statement]:
        statements: list[Statement] = []
        while self.peek().kind != "EOF":
            try:
                statements.append(self.parse_statement())
            except _ParseFailure as failure:
                self._record(failure)
                self._recover()
        return statements

    def parse_statement(self) -> Statement:
        tok = self.peek()
        if tok.kind == "HASH":
            name = tok.value[1:]
            if name in PASSTHROUGH_DIRECTIVES:
                return self.parse_directive()
            if name in ("inf", "sup") or name in AGGREGATE_FUNCTIONS:
                pass  # falls through: a rule may legally start with these
            else:
                raise self._fail(f"unsupported directive '#{name}'", tok)
        if tok.kind == ".":
            raise self._fail("empty statement", tok)
        return self.parse_rule()

    def parse_directive(self) -> Directive:
        start = self.expect("HASH")
        depth = 0
        while True:
            tok = self.next()
            if tok.kind == "EOF":
                raise self._fail("unterminated directive", start)
            if tok.kind == "BAD":
                raise self._fail(f"illegal token {tok.value!r} in directive", tok)
            if tok.kind in ("(", "{"):
                depth += 1
            elif tok.kind in (")", "}"):
                depth -= 1
            elif tok.kind == "." and depth == 0:
                end = tok.offset + 1
                raw = self.text[start.offset : end]
                return Directive(start.value[1:], raw, source_span=(start.offset, end))

    # -- rules ---------------------------------------------------------------

    def parse_rule(self) -> Rule:
        start = self.peek()
        head: Optional[Head] = None
        if self.peek().kind == "COLONDASH":
            self.next()
            body = self.parse_body()
        else:
            head = self.parse_head()
            if self.peek().kind == "COLONDASH":
                self.next()
                body = self.parse_body()
            else:
                body = ()
        dot = self.expect(".")
        return Rule(head=head, body=body, source_span=(start.offset, dot.offset + 1))

    def parse_head(self) -> Head:
        if self.peek().kind == "{":
            return self.parse_choice(left_guard=None)
        term = self.parse_term()
        tok = self.peek()
        if tok.kind == "OP":
            op = self.next().value
            if self.peek().kind != "{":
                raise self._fail("expected '{' after choice guard")
            return self.parse_choice(left_guard=(term, op))
        if tok.kind == "{":
            return self.parse_choice(left_guard=(term, "<="))
        atom = self._term_to_symbolic_atom(term, tok)
        return atom

    def _term_to_symbolic_atom(self, term: Term, at: Token) -> SymbolicAtom:
        if isinstance(term, Symbol):
            return SymbolicAtom(term.name, ())
        if isinstance(term, Function):
            return SymbolicAtom(term.name, term.args)
        raise self._fail(f"expected a symbolic atom, found term '{term}'", at)

    def parse_choice(self, left_guard: Optional[tuple[Term, str]]) -> Choice:
        self.expect("{")
        elements: list[ChoiceElement] = []
        if self.peek().kind != "}":
            elements.append(self.parse_choice_element())
            while self.peek().kind == ";":
                self.next()
                elements.append(self.parse_choice_element())
        self.expect("}")
        right_guard = self._parse_right_guard()
        return Choice(tuple(elements), left_guard=left_guard, right_guard=right_guard)

    def parse_choice_element(self) -> ChoiceElement:
        at = self.peek()
        term = self.parse_term()
        atom = self._term_to_symbolic_atom(term, at)
        condition: tuple[Literal, ...] = ()
        if self.peek().kind == ":":
            self.next()
            condition = self._parse_condition()
        return ChoiceElement(atom, condition)

    def _parse_condition(self) -> tuple[Literal, ...]:
        literals = [self.parse_literal(in_condition=True)]
        while self.peek().kind == ",":
            self.next()
            literals.append(self.parse_literal(in_condition=True))
        return tuple(literals)

    def _parse_right_guard(self) -> Optional[tuple[str, Term]]:
        tok = self.peek()
        if tok.kind == "OP":
            op = self.next().value
            return (op, self.parse_term())
        if tok.kind in _TERM_START or (tok.kind == "HASH" and tok.value in ("#inf", "#sup")):
            return ("<=", self.parse_term())
        return None

    # -- bodies and literals -------------------------------------------------

    def parse_body(self) -> tuple[Literal, ...]:
        literals = [self.parse_literal()]
        while self.peek().kind == ",":
            self.next()
            literals.append(self.parse_literal())
        return tuple(literals)

    def parse_literal(self, in_condition: bool = False) -> Literal:
        negations = 0
        while self.peek().kind == "IDENT" and self.peek().value == "not":
            self.next()
            negations += 1
        if negations > 2:
            raise self._fail("more than two 'not' in a literal")
        atom = self.parse_atom(allow_aggregate=not in_condition)
        if in_condition and not isinstance(atom, (SymbolicAtom, BuiltinAtom)):
            raise self._fail("aggregates cannot appear inside element conditions")
        return Literal(atom=atom, negations=negations)

    def parse_atom(self, allow_aggregate: bool = True) -> Atom:
        tok = self.peek()
        if tok.kind == "HASH" and tok.value[1:] in AGGREGATE_FUNCTIONS:
            if not allow_aggregate:
                raise self._fail("aggregate not allowed here", tok)
            return self.parse_aggregate(left_guard=None)
        term = self.parse_term()
        tok = self.peek()
        if tok.kind == "OP":
            op = self.next().value
            nxt = self.peek()
            if nxt.kind == "HASH" and nxt.value[1:] in AGGREGATE_FUNCTIONS:
                if not allow_aggregate:
                    raise self._fail("aggregate not allowed here", nxt)
                return self.parse_aggregate(left_guard=(term, op))
            right = self.parse_term()
            return BuiltinAtom(term, op, right)
        return self._term_to_symbolic_atom(term, tok)

    def parse_aggregate(self, left_guard: Optional[tuple[Term, str]]) -> AggregateAtom:
        fn_tok = self.expect("HASH")
        function = fn_tok.value[1:]
        self.expect("{")
        elements: list[AggregateElement] = []
        if self.peek().kind != "}":
            elements.append(self.parse_aggregate_element())
            while self.peek().kind == ";":
                self.next()
                elements.append(self.parse_aggregate_element())
        self.expect("}")
        right_guard = self._parse_right_guard()
        return AggregateAtom(
            function=function,
            elements=tuple(elements),
            left_guard=left_guard,
            right_guard=right_guard,
        )

    def parse_aggregate_element(self) -> AggregateElement:
        terms = [self.parse_term()]
        while self.peek().kind == ",":
            self.next()
            terms.append(self.parse_term())
        condition: tuple[Literal, ...] = ()
        if self.peek().kind == ":":
            self.next()
            condition = self._parse_condition()
        return AggregateElement(tuple(terms), condition)

    # -- terms ----------------------------------------------------------------

    def parse_term(self) -> Term:
        return self._parse_addsub()

    def _parse_addsub(self) -> Term:
        left = self._parse_muldiv()
        while self.peek().kind in ("+", "-"):
            op = self.next().value
            right = self._parse_muldiv()
            left = self._make_arith(op, left, right)
        return left

    def _parse_muldiv(self) -> Term:
        left = self._parse_unary()
        while self.peek().kind in ("*", "/"):
            op = self.next().value
            right = self._parse_unary()
            left = self._make_arith(op, left, right)
        return left

    def _parse_unary(self) -> Term:
        if self.peek().kind == "-":
            tok = self.next()
            operand = self._parse_unary()
            if isinstance(operand, Number):
                return Number(-operand.value)
            return self._make_arith("-", Number(0), operand, at=tok)
        return self._parse_primary()

    def _make_arith(self, op: str, left: Term, right: Term, at: Optional[Token] = None) -> Arith:
        for side in (left, right):
            if not isinstance(side, (Number, Variable, Arith)):
                raise self._fail(
                    f"arithmetic over non-integer term '{side}'", at or self.peek()
                )
        return Arith(op, left, right)

    def _parse_primary(self) -> Term:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Number(int(tok.value))
        if tok.kind == "STRING":
            self.next()
            return QuotedString(_unescape(tok.value[1:-1]))
        if tok.kind == "VARIABLE":
            self.next()
            return Variable(tok.value)
        if tok.kind == "HASH" and tok.value == "#inf":
            self.next()
            return Infimum()
        if tok.kind == "HASH" and tok.value == "#sup":
            self.next()
            return Supremum()
        if tok.kind == "IDENT":
            self.next()
            if self.peek().kind == "(":
                self.next()
                args = [self.parse_term()]
                while self.peek().kind == ",":
                    self.next()
                    args.append(self.parse_term())
                self.expect(")")
                return Function(tok.value, tuple(args))
            return Symbol(tok.value)
        if tok.kind == "(":
            self.next()
            inner = self.parse_term()
            self.expect(")")
            return inner
        if tok.kind == "BAD":
            raise self._fail(f"illegal token {tok.value!r}", tok)
        raise self._fail(f"expected a term, found {self._describe(tok)}", tok)


def _unescape(body: str) -> str:
    return (
        body.replace("\\\\", "\x00")
        .replace('\\"', '"')
        .replace("\\n", "\n")
        .replace("\x00", "\\")
    )


def parse_program(text: str | bytes) -> tuple[list[Statement], list[ParseError]]:
    """Parse source text into statements plus positioned errors.

    Never raises: malformed rules are skipped individually and reported.
    Bytes input is decoded as UTF-8; undecodable input yields a single error.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            return [], [ParseError(f"invalid UTF-8: {exc}", line=1, column=1, offset=exc.start)]
    parser = Parser(text)
    statements = parser.parse_program()
    return statements, parser.errors


def parse_rules(text: str | bytes) -> tuple[list[Rule], list[ParseError]]:
    """Like :func:`parse_program` but drops pass-through directives."""
    statements, errors = parse_program(text)
    return [s for s in statements if isinstance(s, Rule)], errors
