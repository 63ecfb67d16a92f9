"""Parser and canonical printer for the clingo-like rule language.

Supported statements::

    head :- lit, ..., not lit.        normal rule
    fact.                             fact
    :- lit, ..., lit.                 integrity constraint
    l { occurs(a(X), t) : cond } u.   action choice (recorded, not solved)
    #program step(t).                 section directive

``occurs/2`` is read as ``action/2``, the constant ``t`` is read as the time
variable ``T`` and each ``_`` becomes a fresh anonymous variable.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .errors import ParseError
from .logic import (
    ActionChoice,
    Atom,
    Clause,
    Compound,
    Constant,
    Literal,
    Program,
    Variable,
)

ACTION_PREDICATE = "action"
ACTION_ALIASES = {"occurs": ACTION_PREDICATE, "action": ACTION_PREDICATE}
TIME_VAR = Variable("T")
SECTION_ORDER = {"base": 0}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<neck>:-)
  | (?P<cmp>!=|<=|>=|=|<|>)
  | (?P<int>\d+(?![A-Za-z_]))
  | (?P<ident>[a-z0-9][A-Za-z0-9_]*)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<directive>\#[a-z]+)
  | (?P<punct>[(),.{}:+\-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourceProgram:
    text: str
    origin: str = "inline"  # "inline", "llm", or a file path


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    recoverable: bool = True

    def __str__(self):
        return f"line {self.line}, column {self.column}: {self.message}"


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


class _StatementError(Exception):
    def __init__(self, tok: _Tok, message: str):
        super().__init__(message)
        self.tok = tok


def _tokenize(text: str, diags: list) -> list:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diags.append(ParseDiagnostic(line, pos - line_start + 1,
                                         f"unknown token {text[pos]!r}"))
            pos += 1
            continue
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        for i, ch in enumerate(chunk):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, toks: list, diags: list, signatures: dict):
        self.toks = toks
        self.i = 0
        self.diags = diags
        self.sig = signatures
        self.anon = 0

    # token helpers
    def peek(self, k=0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.peek()
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("punct", "neck", "cmp")

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if not self.at(text):
            raise _StatementError(tok, f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return self.next()

    def skip_statement(self):
        depth = 0
        while self.peek().kind != "eof":
            tok = self.next()
            if tok.text in "({":
                depth += 1
            elif tok.text in ")}":
                depth -= 1
            elif tok.text == "." and depth <= 0:
                return

    # grammar
    def term(self):
        left = self.simple_term()
        while self.at("+") or self.at("-"):
            op = self.next().text
            right = self.simple_term()
            left = Compound(op, (left, right))
        return left

    def simple_term(self):
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            if tok.text == "_":
                self.anon += 1
                return Variable(f"_{self.anon}")
            return Variable(tok.text)
        if tok.kind == "int":
            self.next()
            return Constant(tok.text)
        if tok.kind == "ident":
            self.next()
            if self.at("("):
                args = self.args()
                return Compound(tok.text, tuple(args))
            if tok.text == "t":
                return TIME_VAR
            return Constant(tok.text)
        if self.at("("):
            self.next()
            inner = self.term()
            self.expect(")")
            return inner
        raise _StatementError(tok, f"unexpected {tok.text or 'end of input'!r} in term")

    def args(self) -> list:
        open_tok = self.expect("(")
        out = [self.term()]
        while self.at(","):
            self.next()
            out.append(self.term())
        if not self.at(")"):
            tok = self.peek()
            raise _StatementError(open_tok if tok.kind == "eof" or tok.text == "."
                                  else tok, "unbalanced parentheses")
        self.next()
        return out

    def atom(self) -> Atom:
        tok = self.peek()
        if tok.kind != "ident":
            raise _StatementError(tok, f"expected predicate, found {tok.text or 'end of input'!r}")
        self.next()
        args = self.args() if self.at("(") else []
        name = ACTION_ALIASES.get(tok.text, tok.text)
        arity = len(args)
        known = self.sig.get(name)
        if known is not None and known != arity:
            raise _StatementError(tok, f"arity conflict: {name}/{arity} but {name}/{known} seen before")
        self.sig.setdefault(name, arity)
        return Atom(name, tuple(args))

    def literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "not" and self.peek(1).kind == "ident":
            self.next()
            return Literal(self.atom(), naf=True)
        # comparison: term op term
        if tok.kind in ("var", "int") or (tok.kind == "ident" and self._comparison_ahead()):
            left = self.term()
            op = self.peek()
            if op.kind != "cmp":
                raise _StatementError(op, "expected comparison operator")
            self.next()
            right = self.term()
            return Literal(Atom(op.text, (left, right)))
        return Literal(self.atom())

    def _comparison_ahead(self) -> bool:
        depth, k = 0, 0
        while True:
            tok = self.peek(k)
            if tok.kind == "eof":
                return False
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            elif depth == 0 and tok.kind == "cmp":
                return True
            elif depth == 0 and tok.text in (",", ".", ":-", "}", ":"):
                return False
            k += 1

    def body(self) -> list:
        out = [self.literal()]
        while self.at(","):
            self.next()
            out.append(self.literal())
        return out

    def choice(self) -> ActionChoice:
        lower = int(self.next().text) if self.peek().kind == "int" else 0
        self.expect("{")
        elem = self.atom()
        conds = []
        if self.at(":"):
            self.next()
            conds = self.body()
        self.expect("}")
        upper = int(self.next().text) if self.peek().kind == "int" else 1
        self.expect(".")
        if elem.predicate != ACTION_PREDICATE or elem.arity != 2 or not isinstance(
                elem.args[0], Compound):
            raise _StatementError(self.peek(), "choice rules must range over action(schema(...), T)")
        schema = elem.args[0]
        action = Atom(schema.functor, schema.args)
        return ActionChoice(action, tuple(conds), lower, upper)

    def statement(self):
        self.anon = 0
        tok = self.peek()
        if tok.kind == "directive":
            self.next()
            if tok.text != "#program":
                raise _StatementError(tok, f"unsupported directive {tok.text}")
            name_tok = self.next()
            if name_tok.kind != "ident":
                raise _StatementError(name_tok, "expected section name")
            name = name_tok.text
            if self.at("("):
                self.next()
                params = [self.next().text]
                while self.at(","):
                    self.next()
                    params.append(self.next().text)
                self.expect(")")
                name = f"{name}({','.join(params)})"
            self.expect(".")
            return ("section", name)
        if tok.kind == "int" and self.peek(1).text == "{" or self.at("{"):
            return ("choice", self.choice())
        if self.at(":-"):
            self.next()
            body = self.body()
            self.expect(".")
            return ("clause", Clause(None, tuple(body)))
        head = self.atom()
        if self.at("."):
            self.next()
            return ("clause", Clause(head, ()))
        if not self.at(":-"):
            raise _StatementError(self.peek(), f"expected ':-' or '.', found {self.peek().text!r}")
        self.next()
        body = self.body()
        if not self.at("."):
            raise _StatementError(self.peek(), f"expected '.', found {self.peek().text or 'end of input'!r}")
        self.next()
        return ("clause", Clause(head, tuple(body)))


def parse_program(src: Union[SourceProgram, str], signatures: Optional[dict] = None
                  ) -> Union[Program, list]:
    """Parse rule text; return a Program, or the list of diagnostics on error."""
    text = src.text if isinstance(src, SourceProgram) else src
    diags: list = []
    toks = _tokenize(text, diags)
    parser = _Parser(toks, diags, dict(signatures or {}))
    clauses, sections, choices = [], [], []
    section = "base"
    while parser.peek().kind != "eof":
        start = parser.i
        try:
            kind, value = parser.statement()
        except _StatementError as err:
            diags.append(ParseDiagnostic(err.tok.line, err.tok.col, str(err)))
            parser.i = start
            parser.skip_statement()
            continue
        if kind == "section":
            section = value
        elif kind == "choice":
            choices.append(value)
        else:
            clauses.append(value)
            sections.append(section)
    if diags:
        return diags
    return Program(tuple(clauses), tuple(choices), tuple(sections))


def parse(text: str) -> Program:
    """Strict variant of parse_program: raises ParseError on any diagnostic."""
    result = parse_program(text)
    if isinstance(result, list):
        raise ParseError(result)
    return result


def parse_clause(text: str) -> Clause:
    prog = parse(text)
    if len(prog.clauses) != 1:
        raise ValueError(f"expected exactly one clause in {text!r}")
    return prog.clauses[0]


def parse_atom(text: str) -> Atom:
    text = text.strip().rstrip(".")
    return parse_clause(text + ".").head


def _clause_sort_key(c: Clause):
    cls = 0 if c.is_constraint else 1 if c.is_fact else 2
    return (cls, str(c))


def _section_key(name: str):
    return (SECTION_ORDER.get(name, 1), name)


def print_program(p: Program) -> str:
    """Canonical text: one statement per line, sorted, trailing newline."""
    groups: dict = {}
    for c, s in zip(p.clauses, p.sections):
        groups.setdefault(s, []).append(c)
    if p.choices:
        groups.setdefault(_choice_section(p), [])
    lines = []
    for name in sorted(groups, key=_section_key):
        if name != "base":
            lines.append(f"#program {name}.")
        lines.extend(str(c) for c in sorted(set(groups[name]), key=_clause_sort_key))
        if name == _choice_section(p):
            lines.extend(sorted(str(ch) for ch in p.choices))
    return "".join(line + "\n" for line in lines)


def _choice_section(p: Program) -> str:
    names = [s for s in p.sections if s.startswith("step")]
    return names[0] if names else "base"
