"""Reader and canonical writer for ``.tgd`` programs.

Grammar (``%`` starts a comment)::

    program  := statement*
    statement:= atom '.'                                   fact
              | [label ':'] atoms '->' [exists] atoms '.'   rule
              | '?-' atoms '.'                             query
    exists   := 'exists' VAR (',' VAR)* ':'
    atoms    := atom (',' atom)*
    atom     := name [ '(' [term (',' term)*] ')' ]

Lowercase identifiers (and integers) are constants and relation names;
identifiers starting with an uppercase letter or ``_`` are variables.
Variables are scoped per statement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .model import Atom, Constant, Query, Rule, Term, Variable


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Program:
    facts: tuple[Atom, ...] = ()
    rules: tuple[Rule, ...] = ()
    queries: tuple[Query, ...] = ()

    def __post_init__(self):
        for f in self.facts:
            if f.variables() or f.nulls():
                raise ValueError(f"fact {f} is not ground")
        ids = [r.id for r in self.rules]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate rule ids")

    def arities(self) -> dict[str, int]:
        out: dict[str, int] = {}
        atoms = list(self.facts)
        for r in self.rules:
            atoms += list(r.body) + list(r.head)
        for q in self.queries:
            atoms += list(q.body)
        for a in atoms:
            if out.setdefault(a.relation, a.arity) != a.arity:
                raise ValueError(f"relation {a.relation} used with arities {out[a.relation]} and {a.arity}")
        return out


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<arrow>->)
  | (?P<query>\?-)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<int>-?[0-9]+)
  | (?P<punct>[(),.:])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            if kind == "punct":
                kind = chunk
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _is_variable_name(name: str) -> bool:
    return name[0].isupper() or name[0] == "_"


@dataclass
class _Parser:
    toks: list[_Tok]
    i: int = 0
    arity: dict[str, tuple[int, _Tok]] = field(default_factory=dict)

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, kind: str) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            want = {"ident": "identifier", "eof": "end of input"}.get(kind, repr(kind))
            got = repr(tok.text) if tok.text else "end of input"
            raise ParseError(f"expected {want}, found {got}", tok.line, tok.col)
        self.i += 1
        return tok

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.peek()
        raise ParseError(msg, tok.line, tok.col)

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind == "int":
            self.i += 1
            return Constant(tok.text)
        tok = self.take("ident")
        return Variable(tok.text) if _is_variable_name(tok.text) else Constant(tok.text)

    def atom(self) -> Atom:
        tok = self.take("ident")
        if _is_variable_name(tok.text):
            self.error(f"relation name {tok.text!r} must start with a lowercase letter", tok)
        args: list[Term] = []
        if self.peek().kind == "(":
            self.i += 1
            if self.peek().kind != ")":
                args.append(self.term())
                while self.peek().kind == ",":
                    self.i += 1
                    args.append(self.term())
            self.take(")")
        known = self.arity.get(tok.text)
        if known is None:
            self.arity[tok.text] = (len(args), tok)
        elif known[0] != len(args):
            self.error(
                f"relation {tok.text!r} has arity {len(args)} here but {known[0]} "
                f"at {known[1].line}:{known[1].col}",
                tok,
            )
        return Atom(tok.text, tuple(args))

    def atoms(self) -> list[Atom]:
        out = [self.atom()]
        while self.peek().kind == ",":
            self.i += 1
            out.append(self.atom())
        return out

    def program(self) -> Program:
        facts: list[Atom] = []
        rules: list[Rule] = []
        queries: list[Query] = []
        while self.peek().kind != "eof":
            start = self.peek()
            if start.kind == "query":
                self.i += 1
                body = self.atoms()
                self.take(".")
                queries.append(Query(tuple(body)))
                continue
            label = None
            if start.kind == "ident" and self.peek(1).kind == ":":
                label = start.text
                self.i += 2
            body = self.atoms()
            if self.peek().kind == ".":
                if label is not None:
                    self.error("facts cannot carry a label", start)
                self.take(".")
                if len(body) != 1:
                    self.error("a fact is a single atom; did you forget '->'?", start)
                fact = body[0]
                if fact.variables():
                    names = ", ".join(sorted(v.name for v in fact.variables()))
                    self.error(f"fact {fact} contains variables ({names})", start)
                facts.append(fact)
                continue
            self.take("arrow")
            declared = None
            if self.peek().kind == "ident" and self.peek().text == "exists":
                self.i += 1
                names = [self.take("ident")]
                while self.peek().kind == ",":
                    self.i += 1
                    names.append(self.take("ident"))
                self.take(":")
                for n in names:
                    if not _is_variable_name(n.text):
                        self.error(f"{n.text!r} is not a variable", n)
                declared = frozenset(Variable(n.text) for n in names)
            head = self.atoms()
            self.take(".")
            rule_id = label or f"r{len(rules) + 1}"
            if any(r.id == rule_id for r in rules):
                self.error(f"duplicate rule label {rule_id!r}", start)
            try:
                rules.append(Rule(rule_id, tuple(body), tuple(head), declared))
            except ValueError as exc:
                self.error(str(exc), start)
        return Program(tuple(facts), tuple(rules), tuple(queries))


def parse_program(text: str) -> Program:
    return _Parser(_tokenize(text)).program()


def parse_atoms(text: str) -> list[Atom]:
    """Parse a comma-separated conjunction, e.g. ``"t(X,Y), u(Y,Z)"``."""
    p = _Parser(_tokenize(text))
    out = p.atoms()
    p.take("eof")
    return out


def parse_rule(text: str, rule_id: str = "r1") -> Rule:
    prog = parse_program(text if text.rstrip().endswith(".") else text + ".")
    if len(prog.rules) != 1 or prog.facts or prog.queries:
        raise ValueError(f"expected exactly one rule in {text!r}")
    rule = prog.rules[0]
    if rule.id == "r1" and rule_id != "r1":
        rule = Rule(rule_id, rule.body, rule.head)
    return rule
