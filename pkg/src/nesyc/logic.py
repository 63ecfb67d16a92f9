"""First-order terms, atoms, clauses and the operations over them.

Everything here is immutable. Variables start with an uppercase letter or an
underscore, constants and functors with a lowercase letter or a digit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

from .errors import GroundingOverflow

ARITH_OPS = ("+", "-")
COMPARISON_OPS = ("!=", "=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return "_" if self.name.startswith("_") else self.name


@dataclass(frozen=True)
class Constant:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Compound:
    functor: str
    args: tuple

    def __post_init__(self):
        if not self.args:
            raise ValueError("compound terms need at least one argument")
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self):
        if self.functor in ARITH_OPS and len(self.args) == 2:
            return f"{self.args[0]}{self.functor}{self.args[1]}"
        return f"{self.functor}({', '.join(map(str, self.args))})"


Term = Union[Variable, Constant, Compound]
Substitution = dict  # Variable -> Term


def is_variable_name(name: str) -> bool:
    return bool(name) and (name[0].isupper() or name[0] == "_")


def term(text) -> Term:
    """Build a simple term from a bare identifier (convenience for tests and code)."""
    if isinstance(text, (Variable, Constant, Compound)):
        return text
    if isinstance(text, int):
        return Constant(str(text))
    return Variable(text) if is_variable_name(text) else Constant(text)


def _int_value(t: Term) -> Optional[int]:
    if isinstance(t, Constant):
        try:
            return int(t.name)
        except ValueError:
            return None
    return None


def term_is_ground(t: Term) -> bool:
    if isinstance(t, Variable):
        return False
    if isinstance(t, Compound):
        return all(term_is_ground(a) for a in t.args)
    return True


def term_variables(t: Term) -> Iterator[Variable]:
    if isinstance(t, Variable):
        yield t
    elif isinstance(t, Compound):
        for a in t.args:
            yield from term_variables(a)


def _simplify(t: Compound) -> Term:
    if t.functor in ARITH_OPS and len(t.args) == 2:
        a, b = (_int_value(x) for x in t.args)
        if a is not None and b is not None:
            return Constant(str(a + b if t.functor == "+" else a - b))
    return t


def subst_term(t: Term, theta: Mapping) -> Term:
    if isinstance(t, Variable):
        return theta.get(t, t)
    if isinstance(t, Compound):
        return _simplify(Compound(t.functor, tuple(subst_term(a, theta) for a in t.args)))
    return t


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple = ()

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("empty predicate name")
        object.__setattr__(self, "args", tuple(term(a) for a in self.args))

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def is_comparison(self) -> bool:
        return self.predicate in COMPARISON_OPS

    def is_ground(self) -> bool:
        return all(term_is_ground(a) for a in self.args)

    def variables(self) -> Iterator[Variable]:
        for a in self.args:
            yield from term_variables(a)

    def __str__(self):
        if self.is_comparison:
            return f"{self.args[0]} {self.predicate} {self.args[1]}"
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(map(str, self.args))})"


def atom(predicate: str, *args) -> Atom:
    return Atom(predicate, tuple(term(a) for a in args))


@dataclass(frozen=True)
class Literal:
    atom: Atom
    naf: bool = False

    @property
    def positive(self) -> bool:
        return not self.naf

    def __str__(self):
        return f"not {self.atom}" if self.naf else str(self.atom)


@dataclass(frozen=True)
class Clause:
    head: Optional[Atom]
    body: tuple = ()

    def __post_init__(self):
        seen, body = set(), []
        for lit in self.body:
            if lit not in seen:
                seen.add(lit)
                body.append(lit)
        object.__setattr__(self, "body", tuple(body))

    @property
    def is_constraint(self) -> bool:
        return self.head is None and bool(self.body)

    @property
    def is_fact(self) -> bool:
        return self.head is not None and not self.body

    @property
    def is_rule(self) -> bool:
        return self.head is not None and bool(self.body)

    def atoms(self) -> Iterator[Atom]:
        if self.head is not None:
            yield self.head
        for lit in self.body:
            yield lit.atom

    def variables(self) -> list:
        """Distinct variables in order of first occurrence."""
        out = {}
        for a in self.atoms():
            for v in a.variables():
                out.setdefault(v, None)
        return list(out)

    def is_ground(self) -> bool:
        return all(a.is_ground() for a in self.atoms())

    def __str__(self):
        body = ", ".join(map(str, self.body))
        if self.head is None:
            return f":- {body}."
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {body}."


@dataclass(frozen=True)
class ActionChoice:
    """``l { action : cond } u`` -- the action generator of a planning step."""

    action: Atom
    conditions: tuple = ()
    lower: int = 0
    upper: int = 1
    predicate: str = "action"

    def __str__(self):
        conds = ", ".join(map(str, self.conditions))
        inner = f"{self.predicate}({self.action}, T)"
        if conds:
            inner += f" : {conds}"
        return f"{self.lower} {{ {inner} }} {self.upper}."


@dataclass(frozen=True, eq=False)
class Program:
    """A set of clauses plus action-choice declarations.

    Equality ignores clause order: two programs are equal when they hold the
    same clauses in the same ``#program`` sections and the same choices.
    """

    clauses: tuple = ()
    choices: tuple = ()
    sections: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(self.clauses))
        object.__setattr__(self, "choices", tuple(self.choices))
        secs = tuple(self.sections) or ("base",) * len(self.clauses)
        if len(secs) != len(self.clauses):
            raise ValueError("sections must align with clauses")
        object.__setattr__(self, "sections", secs)

    def _key(self):
        return (frozenset(zip(self.clauses, self.sections)), frozenset(self.choices))

    def __eq__(self, other):
        if not isinstance(other, Program):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    def __bool__(self):
        return bool(self.clauses) or bool(self.choices)

    @property
    def constraints(self) -> list:
        return [c for c in self.clauses if c.is_constraint]

    @property
    def facts(self) -> list:
        return [c for c in self.clauses if c.is_fact]

    @property
    def rules(self) -> list:
        return [c for c in self.clauses if c.is_rule]

    @property
    def signatures(self) -> dict:
        sig = {}
        for c in self.clauses:
            for a in c.atoms():
                if not a.is_comparison:
                    sig.setdefault(a.predicate, a.arity)
        return sig

    def union(self, *others: "Program") -> "Program":
        clauses, sections, seen = [], [], set()
        choices = list(self.choices)
        for p in (self, *others):
            for c, s in zip(p.clauses, p.sections):
                if c not in seen:
                    seen.add(c)
                    clauses.append(c)
                    sections.append(s)
            for ch in p.choices:
                if ch not in choices:
                    choices.append(ch)
        return Program(tuple(clauses), tuple(choices), tuple(sections))

    def body_size(self) -> int:
        return sum(len(c.body) for c in self.clauses)

    def __str__(self):
        from .lptext import print_program

        return print_program(self)


def apply_substitution(x, theta: Mapping):
    """Replace bound variables in a term, atom, literal or clause."""
    if isinstance(x, (Variable, Constant, Compound)):
        return subst_term(x, theta)
    if isinstance(x, Atom):
        return Atom(x.predicate, tuple(subst_term(a, theta) for a in x.args))
    if isinstance(x, Literal):
        return Literal(apply_substitution(x.atom, theta), x.naf)
    if isinstance(x, Clause):
        head = apply_substitution(x.head, theta) if x.head is not None else None
        return Clause(head, tuple(apply_substitution(l, theta) for l in x.body))
    raise TypeError(f"cannot substitute into {type(x).__name__}")


def match_term(pattern: Term, target: Term, theta: dict) -> Optional[dict]:
    """One-way matching; variables in ``target`` are treated as constants."""
    if isinstance(pattern, Variable):
        bound = theta.get(pattern)
        if bound is None:
            out = dict(theta)
            out[pattern] = target
            return out
        return theta if bound == target else None
    if isinstance(pattern, Constant):
        return theta if pattern == target else None
    # compound
    if isinstance(target, Compound):
        if target.functor != pattern.functor or len(target.args) != len(pattern.args):
            return None
        for p, t in zip(pattern.args, target.args):
            theta = match_term(p, t, theta)
            if theta is None:
                return None
        return theta
    # arithmetic pattern against an integer constant, e.g. T-1 vs 3 with T bound
    if pattern.functor in ARITH_OPS:
        inst = subst_term(pattern, theta)
        if term_is_ground(inst):
            return theta if inst == target else None
        left, right = pattern.args
        t_val, r_val = _int_value(target), _int_value(subst_term(right, theta))
        if isinstance(left, Variable) and t_val is not None and r_val is not None:
            value = t_val + r_val if pattern.functor == "-" else t_val - r_val
            return match_term(left, Constant(str(value)), theta)
    return None


def match_atom(pattern: Atom, ground: Atom, theta: Optional[Mapping] = None) -> Optional[dict]:
    """Return θ with apply(pattern, θ) == ground, or None."""
    if pattern.predicate != ground.predicate or pattern.arity != ground.arity:
        return None
    out = dict(theta) if theta else {}
    for p, g in zip(pattern.args, ground.args):
        out = match_term(p, g, out)
        if out is None:
            return None
    return out


def _match_literals(lits: list, targets: list, theta: dict) -> bool:
    if not lits:
        return True
    first, rest = lits[0], lits[1:]
    for cand in targets:
        if cand.naf != first.naf:
            continue
        t2 = match_atom(first.atom, cand.atom, theta)
        if t2 is not None and _match_literals(rest, targets, t2):
            return True
    return False


def theta_subsumes(c: Clause, d: Clause) -> bool:
    """True iff some θ maps c's literal set into d's literal set."""
    theta: dict = {}
    if c.head is not None:
        if d.head is None:
            return False
        theta = match_atom(c.head, d.head)
        if theta is None:
            return False
    # most constrained literals first keeps backtracking shallow
    lits = sorted(c.body, key=lambda l: sum(
        1 for t in d.body if t.atom.predicate == l.atom.predicate and t.naf == l.naf))
    return _match_literals(lits, list(d.body), theta)


def ground_instances(c: Clause, constants: Iterable, cap: int = 10**6) -> list:
    """All instances of ``c`` with its variables replaced by ``constants``.

    Variables are ordered by name and constants by name, so the output order
    is deterministic. Raises GroundingOverflow if the count would exceed cap.
    """
    if cap <= 0:
        raise ValueError("cap must be positive")
    variables = sorted(c.variables(), key=lambda v: v.name)
    if not variables:
        return [c]
    consts = sorted({term(k) for k in constants}, key=lambda k: k.name)
    total = len(consts) ** len(variables)
    if total > cap:
        raise GroundingOverflow(f"{total} instances of {c} exceed cap {cap}")
    return [apply_substitution(c, dict(zip(variables, combo)))
            for combo in itertools.product(consts, repeat=len(variables))]


def rename_variables(c: Clause, prefix: str = "V") -> Clause:
    """Rename variables to prefix0, prefix1, ... in order of first occurrence."""
    theta = {v: Variable(f"{prefix}{i}") for i, v in enumerate(c.variables())}
    return apply_substitution(c, theta)


def variant_key(c: Clause) -> str:
    """A string equal for two clauses iff they agree up to renaming and body order."""
    best = None
    body = list(c.body)
    perms = itertools.permutations(body) if len(body) <= 6 else [sorted(body, key=str)]
    for perm in perms:
        renamed = rename_variables(Clause(c.head, tuple(perm)))
        text = str(renamed)
        if best is None or text < best:
            best = text
    return best if best is not None else str(rename_variables(c))


def constants_of(items: Iterable) -> set:
    """Constants occurring (at any depth) in atoms or clauses."""
    out = set()

    def walk(t):
        if isinstance(t, Constant):
            out.add(t)
        elif isinstance(t, Compound):
            for a in t.args:
                walk(a)

    for x in items:
        atoms = x.atoms() if isinstance(x, Clause) else [x]
        for a in atoms:
            for t in a.args:
                walk(t)
    return out
