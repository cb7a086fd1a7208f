"""Reader and printer for the textual rule, fact and query formats.

Rules::

    % comment
    s11: t(X,Y) -> exists Z: t(Y,Z), u(Y,Z).
    t(X,Y), u(Y,Z) -> t(Y,Z), u(X,Y).

Variables start with an uppercase letter; constants are lowercase identifiers,
digit strings or single-quoted strings; predicates are lowercase identifiers.
A rule may carry a ``label:`` prefix, otherwise it is labelled ``r<n>``. Fact
files hold ground atoms ``p(c1,...,cn).``; query files hold ``?- a1, ..., an.``
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .syntax import Atom, Constant, Database, Program, Query, Rule, RuleError, Term, Variable


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<arrow>->)
  | (?P<query>\?-)
  | (?P<quoted>'(?:[^'\\\n]|\\.)*')
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_]*)
  | (?P<punct>[(),.:&])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks: List[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str) -> None:
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.cur
        return ParseError(msg, tok.line, tok.col)

    def take(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            raise self.fail(f"expected {want!r}, found {got!r}")
        self.i += 1
        return tok

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        tok = self.cur
        return tok.kind == kind and (text is None or tok.text == text)

    def term(self) -> Term:
        tok = self.cur
        if tok.kind == "quoted":
            self.i += 1
            body = tok.text[1:-1]
            return Constant(re.sub(r"\\(.)", r"\1", body))
        if tok.kind != "ident":
            raise self.fail(f"expected a term, found {tok.text or 'end of input'!r}")
        self.i += 1
        if tok.text.startswith("_"):
            raise self.fail(f"identifiers may not start with '_' ({tok.text!r})", tok)
        if tok.text[0].isupper():
            return Variable(tok.text)
        return Constant(tok.text)

    def atom(self) -> Atom:
        tok = self.take("ident")
        if not tok.text[0].islower():
            raise self.fail(f"predicate names start with a lowercase letter ({tok.text!r})", tok)
        args: List[Term] = []
        if self.at("punct", "("):
            self.i += 1
            if not self.at("punct", ")"):
                args.append(self.term())
                while self.at("punct", ","):
                    self.i += 1
                    args.append(self.term())
            self.take("punct", ")")
        return Atom(tok.text, tuple(args))

    def conjunction(self) -> List[Atom]:
        atoms = [self.atom()]
        while self.at("punct", ",") or self.at("punct", "&"):
            self.i += 1
            atoms.append(self.atom())
        return atoms

    def rule(self, default_label: str) -> Rule:
        start = self.cur
        label = default_label
        if self.cur.kind == "ident" and self.peek().kind == "punct" and self.peek().text == ":":
            label = self.cur.text
            self.i += 2
        body = self.conjunction()
        self.take("arrow")
        exists: List[str] = []
        if self.at("ident", "exists") and self.peek().kind == "ident" and self.peek().text[0].isupper():
            self.i += 1
            exists.append(self._var_name())
            while self.at("punct", ","):
                self.i += 1
                exists.append(self._var_name())
            self.take("punct", ":")
        head = self.conjunction()
        self.take("punct", ".")
        try:
            return Rule(tuple(body), tuple(head), frozenset(Variable(v) for v in exists), label)
        except RuleError as exc:
            raise ParseError(str(exc), start.line, start.col) from None

    def _var_name(self) -> str:
        tok = self.take("ident")
        if not tok.text[0].isupper():
            raise self.fail(f"existential variables start with an uppercase letter ({tok.text!r})", tok)
        return tok.text


def parse_program(text: str) -> Program:
    p = _Parser(text)
    rules: List[Rule] = []
    first = p.cur
    while not p.at("eof"):
        rules.append(p.rule(f"r{len(rules) + 1}"))
    try:
        return Program(tuple(rules))
    except RuleError as exc:
        raise ParseError(str(exc), first.line, first.col) from None


def parse_facts(text: str) -> Database:
    p = _Parser(text)
    facts: List[Atom] = []
    first = p.cur
    while not p.at("eof"):
        tok = p.cur
        a = p.atom()
        if a.var_set():
            raise ParseError(f"fact {a} contains variables", tok.line, tok.col)
        p.take("punct", ".")
        facts.append(a)
    try:
        return Database(frozenset(facts))
    except RuleError as exc:
        raise ParseError(str(exc), first.line, first.col) from None


def parse_query(text: str) -> Query:
    p = _Parser(text)
    start = p.cur
    p.take("query")
    body = p.conjunction()
    p.take("punct", ".")
    if not p.at("eof"):
        raise p.fail("trailing input after query")
    try:
        return Query(tuple(body))
    except RuleError as exc:
        raise ParseError(str(exc), start.line, start.col) from None


def parse_atoms(text: str) -> Tuple[Atom, ...]:
    """Parse a bare comma-separated conjunction such as ``t(X,Y), u(Y,Z)``."""
    p = _Parser(text)
    atoms = p.conjunction()
    if p.at("punct", "."):
        p.i += 1
    if not p.at("eof"):
        raise p.fail("trailing input after atoms")
    return tuple(atoms)


def format_program(program: Program) -> str:
    return "".join(str(r) + "\n" for r in program.rules)


def format_facts(db: Database) -> str:
    return "".join(f"{a}.\n" for a in db.sorted_facts())
