"""Conjunctive query and rule language: abstract syntax, parser, unparser.

Lexical convention mirrors the usual logic-programming typography: identifiers
starting lowercase are variables, identifiers starting uppercase (or quoted
strings, or number literals) are constants. Queries are conjunctions of
positive atoms with an optional `exists` prefix; rules are range-restricted
single-head implications.

    exists y: Ill(x, y) & Treat(x, Inhaler)
    Ill(x, Flu) -> Treat(x, Inhaler)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .errors import QueryParseError
from .values import Value, format_rational, parse_rational


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Constant:
    value: Value


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class Atom:
    relation_name: str
    args: tuple[Term, ...]

    def variables(self) -> list[str]:
        return [t.name for t in self.args if isinstance(t, Variable)]


@dataclass(frozen=True)
class ConjunctiveQuery:
    """A conjunction of positive atoms; free variables form the answer tuple."""

    atoms: tuple[Atom, ...]
    existential_vars: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.atoms:
            raise QueryParseError("empty conjunction")
        occurring = {v for atom in self.atoms for v in atom.variables()}
        unused = self.existential_vars - occurring
        if unused:
            raise QueryParseError(
                f"existential variable(s) {sorted(unused)} do not occur in the query"
            )


@dataclass(frozen=True)
class Rule:
    """Single-head rule; every head variable must occur in the body."""

    body: tuple[Atom, ...]
    head: Atom

    def __post_init__(self):
        if not self.body:
            raise QueryParseError("rule body must contain at least one atom")
        body_vars = {v for atom in self.body for v in atom.variables()}
        loose = [v for v in self.head.variables() if v not in body_vars]
        if loose:
            raise QueryParseError(
                f"head variable(s) {sorted(set(loose))} not range-restricted "
                "(missing from the rule body)"
            )


@dataclass(frozen=True)
class RuleBase:
    rules: tuple[Rule, ...]


def free_variables(q: ConjunctiveQuery) -> list[str]:
    """Free variables in order of first occurrence across the atom list."""
    out: list[str] = []
    for atom in q.atoms:
        for name in atom.variables():
            if name not in q.existential_vars and name not in out:
                out.append(name)
    return out


# --- tokenizer ----------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<arrow>->)
  | (?P<punc>[(),:&])
    """,
    re.VERBOSE,
)

_Token = tuple[str, str, int]  # kind, text, offset


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QueryParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        kind = m.lastgroup
        if kind != "ws":
            yield kind, m.group(), m.start()
    yield "eof", "", len(text)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        i = min(self.pos + ahead, len(self.tokens) - 1)
        return self.tokens[i]

    def take(self, kind: str | None = None, text: str | None = None) -> _Token:
        tok = self.peek()
        if kind is not None and tok[0] != kind:
            raise QueryParseError(f"expected {kind}, found {tok[1]!r}", tok[2])
        if text is not None and tok[1] != text:
            raise QueryParseError(f"expected {text!r}, found {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (text is None or tok[1] == text)

    def term(self) -> Term:
        tok = self.peek()
        if tok[0] == "number":
            self.take()
            return Constant(parse_rational(tok[1]))
        if tok[0] == "string":
            self.take()
            body = tok[1][1:-1]
            return Constant(re.sub(r"\\(.)", r"\1", body))
        if tok[0] == "ident":
            self.take()
            if tok[1][0].islower():
                return Variable(tok[1])
            return Constant(tok[1])
        raise QueryParseError(f"expected a term, found {tok[1]!r}", tok[2])

    def atom(self) -> Atom:
        name_tok = self.take("ident")
        self.take("punc", "(")
        args = [self.term()]
        while self.at("punc", ","):
            self.take()
            args.append(self.term())
        self.take("punc", ")")
        return Atom(name_tok[1], tuple(args))

    def conjunction(self) -> list[Atom]:
        atoms = [self.atom()]
        while self.at("punc", "&"):
            self.take()
            atoms.append(self.atom())
        return atoms

    def end(self) -> None:
        tok = self.peek()
        if tok[0] != "eof":
            raise QueryParseError(f"unexpected trailing input {tok[1]!r}", tok[2])


def parse_query(text: str) -> ConjunctiveQuery:
    """Parse `[exists v, ...:] Atom & Atom & ...` into a ConjunctiveQuery."""
    p = _Parser(text)
    existential: list[str] = []
    if p.at("ident", "exists") and p.peek(1)[0] == "ident":
        p.take()
        while True:
            tok = p.take("ident")
            if not tok[1][0].islower():
                raise QueryParseError(f"{tok[1]!r} is not a variable", tok[2])
            existential.append(tok[1])
            if p.at("punc", ","):
                p.take()
                continue
            break
        p.take("punc", ":")
    atoms = p.conjunction()
    p.end()
    return ConjunctiveQuery(tuple(atoms), frozenset(existential))


def parse_rule(text: str) -> Rule:
    """Parse `Atom & ... -> Atom` into a range-restricted Rule."""
    p = _Parser(text)
    body = p.conjunction()
    p.take("arrow")
    head = p.atom()
    if p.at("punc", "&"):
        tok = p.peek()
        raise QueryParseError("rule head must be a single atom", tok[2])
    p.end()
    return Rule(tuple(body), head)


def parse_rules_text(text: str) -> RuleBase:
    """Parse a rules file: one rule per line, `#` comments and blanks ignored."""
    rules = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            rules.append(parse_rule(line))
    return RuleBase(tuple(rules))


# --- canonical unparser -------------------------------------------------

_BARE_CONST_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")


def format_term(term: Term) -> str:
    if isinstance(term, Variable):
        return term.name
    value = term.value
    if isinstance(value, Fraction):
        return format_rational(value)
    if _BARE_CONST_RE.match(value):
        return value
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def format_atom(atom: Atom) -> str:
    return f"{atom.relation_name}({', '.join(format_term(t) for t in atom.args)})"


def format_query(q: ConjunctiveQuery) -> str:
    """Canonical rendering; `parse_query(format_query(q)) == q`."""
    body = " & ".join(format_atom(a) for a in q.atoms)
    if q.existential_vars:
        return f"exists {', '.join(sorted(q.existential_vars))}: {body}"
    return body


def format_rule(rule: Rule) -> str:
    return f"{' & '.join(format_atom(a) for a in rule.body)} -> {format_atom(rule.head)}"
