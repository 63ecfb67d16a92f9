"""Model checking for learning from interpretations.

An example is a set of ground atoms. Background knowledge is closed bottom-up
(stratified negation allowed) and a hypothesis is then checked clause by
clause against the closed base: constraints must not fire, rules whose body
holds must have their head in the base.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Optional

from .errors import GroundingOverflow, NonStratifiedProgram
from .logic import (
    Atom,
    Clause,
    Constant,
    Literal,
    Program,
    Variable,
    apply_substitution,
    constants_of,
    match_atom,
)

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class Interpretation:
    atoms: frozenset = frozenset()

    def __post_init__(self):
        atoms = frozenset(self.atoms)
        for a in atoms:
            if not a.is_ground():
                raise ValueError(f"interpretations hold ground atoms only, got {a}")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def index(self) -> dict:
        idx: dict = {}
        for a in self.atoms:
            idx.setdefault((a.predicate, a.arity), []).append(a)
        for v in idx.values():
            v.sort(key=str)
        return idx

    @cached_property
    def constants(self) -> frozenset:
        return frozenset(constants_of(self.atoms))

    def __contains__(self, a):
        return a in self.atoms

    def __iter__(self):
        return iter(sorted(self.atoms, key=str))

    def __len__(self):
        return len(self.atoms)

    def union(self, other: Iterable) -> "Interpretation":
        return Interpretation(self.atoms | frozenset(other))

    def __str__(self):
        return "{" + ", ".join(str(a) for a in self) + "}"


@dataclass(frozen=True)
class Example:
    interp: Interpretation
    positive: bool
    origin: str = "T"  # "T" experience set, "M" working memory
    id: str = ""

    @property
    def label(self) -> int:
        return int(self.positive)


@dataclass(frozen=True)
class EvaluationBase:
    closure: Interpretation
    extra_constants: frozenset = field(default=frozenset())

    @property
    def constants(self) -> frozenset:
        return self.closure.constants | self.extra_constants


def _compare(op: str, a, b) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    try:
        x, y = int(a.name), int(b.name)
    except (AttributeError, ValueError):
        x, y = str(a), str(b)
    return {"<": x < y, ">": x > y, "<=": x <= y, ">=": x >= y}[op]


def _holds(lit: Literal, base: Interpretation, theta: dict) -> bool:
    a = apply_substitution(lit.atom, theta)
    if a.is_comparison:
        result = _compare(a.predicate, a.args[0], a.args[1])
    else:
        result = a in base.atoms
    return result != lit.naf


def _unbound(atoms: Iterable[Atom], theta: dict) -> list:
    out = {}
    for a in atoms:
        for v in a.variables():
            if v not in theta:
                out.setdefault(v, None)
    return list(out)


def solutions(body: Iterable[Literal], base: Interpretation, theta: Optional[dict] = None,
              constants: Iterable = (), extra_vars: Iterable[Variable] = (),
              cap: int = DEFAULT_CAP) -> Iterator[dict]:
    """Yield every substitution making all body literals true in ``base``.

    Positive atoms are joined against the base; variables left unbound after
    the join (only under ``not`` or in comparisons, or listed in
    ``extra_vars``) range over ``constants``.
    """
    theta = dict(theta or {})
    body = list(body)
    positives = [l for l in body if l.positive and not l.atom.is_comparison]
    rest = [l for l in body if l.naf or l.atom.is_comparison]
    consts = sorted(set(constants), key=lambda c: c.name)
    extra_vars = list(extra_vars)

    def join(i: int, th: dict):
        if i == len(positives):
            yield th
            return
        pattern = apply_substitution(positives[i].atom, th)
        if pattern.is_ground():
            if pattern in base.atoms:
                yield from join(i + 1, th)
            return
        for cand in base.index.get((pattern.predicate, pattern.arity), ()):
            t2 = match_atom(pattern, cand, th)
            if t2 is not None:
                yield from join(i + 1, t2)

    for th in join(0, theta):
        free = _unbound([l.atom for l in rest], th)
        free += [v for v in extra_vars if v not in th and v not in free]
        if free:
            if len(consts) ** len(free) > cap:
                raise GroundingOverflow(
                    f"{len(consts)}^{len(free)} groundings of {free} exceed cap {cap}")
            combos = itertools.product(consts, repeat=len(free))
        else:
            combos = [()]
        for combo in combos:
            full = dict(th)
            full.update(zip(free, combo))
            if all(_holds(l, base, full) for l in rest):
                yield full


# --- stratification -------------------------------------------------------

def stratify(rules: Iterable[Clause], ignore=None) -> list:
    """Group rules into strata so negated predicates are complete before use.

    ``ignore(literal)`` may drop dependency edges, e.g. for literals about an
    earlier time step that the caller treats as given.
    """
    rules = [r for r in rules if r.head is not None]
    heads = {r.head.predicate for r in rules}
    level = {p: 0 for p in heads}
    for _ in range(len(heads) + 1):
        changed = False
        for r in rules:
            h = r.head.predicate
            for lit in r.body:
                q = lit.atom.predicate
                if q not in level or (ignore is not None and ignore(lit)):
                    continue
                need = level[q] + (1 if lit.naf else 0)
                if level[h] < need:
                    level[h] = need
                    changed = True
        if not changed:
            break
        if max(level.values(), default=0) > len(heads):
            break
    if any(v > len(heads) for v in level.values()) or changed:
        raise NonStratifiedProgram("negation cycle through " + ", ".join(sorted(heads)))
    strata: dict = {}
    for r in rules:
        strata.setdefault(level[r.head.predicate], []).append(r)
    return [strata[k] for k in sorted(strata)]


def fixpoint(rules: Iterable[Clause], atoms: Iterable[Atom], constants: Iterable = (),
             cap: int = DEFAULT_CAP) -> frozenset:
    """Stratified bottom-up closure of ``rules`` over ``atoms``."""
    current = set(atoms)
    rules = list(rules)
    consts = set(constants)
    for r in rules:
        consts |= constants_of([r])
    for stratum in stratify(rules):
        while True:
            interp = Interpretation(frozenset(current))
            consts_now = consts | interp.constants
            new = set()
            for r in stratum:
                head_vars = list(r.head.variables())
                for th in solutions(r.body, interp, constants=consts_now,
                                    extra_vars=head_vars, cap=cap):
                    h = apply_substitution(r.head, th)
                    if h not in current:
                        new.add(h)
            if not new:
                break
            current |= new
    return frozenset(current)


def bk_closure(bk: Program, e, constants: Iterable = (), cap: int = DEFAULT_CAP) -> EvaluationBase:
    """Close background knowledge facts and rules over the example atoms."""
    atoms = set(e.atoms if isinstance(e, Interpretation) else e)
    atoms |= {c.head for c in bk.clauses if c.is_fact and c.head.is_ground()}
    rules = [c for c in bk.clauses if c.head is not None and not (c.is_fact and c.head.is_ground())]
    closed = fixpoint(rules, atoms, constants, cap)
    return EvaluationBase(Interpretation(closed), frozenset(constants_of(bk.clauses)))


def clause_violations(c: Clause, base: EvaluationBase, constants: Optional[Iterable] = None,
                      cap: int = DEFAULT_CAP) -> Iterator[dict]:
    """Substitutions under which ``c`` is false in the base."""
    consts = base.constants if constants is None else constants
    head_vars = list(c.head.variables()) if c.head is not None else []
    for th in solutions(c.body, base.closure, constants=consts, extra_vars=head_vars, cap=cap):
        if c.head is None:
            yield th
        elif apply_substitution(c.head, th) not in base.closure.atoms:
            yield th


def is_model(e, h: Program, base: EvaluationBase, cap: int = DEFAULT_CAP) -> bool:
    """True iff the base (built from ``e`` and BK) satisfies every clause of ``h``."""
    consts = base.constants | frozenset(constants_of(h.clauses))
    for c in h.clauses:
        for _ in clause_violations(c, base, consts, cap):
            return False
    return True


def covers(h: Program, e, bk: Program = Program(), cap: int = DEFAULT_CAP) -> bool:
    """``e`` is a model of ``h`` together with ``bk``."""
    interp = e.interp if isinstance(e, Example) else e
    return is_model(interp, h, bk_closure(bk, interp, cap=cap), cap)


def violated_constraints(base: EvaluationBase, h: Program, cap: int = DEFAULT_CAP) -> list:
    """Every (constraint, θ) whose body is satisfied in the base, sorted."""
    consts = base.constants | frozenset(constants_of(h.clauses))
    out = []
    for c in h.constraints:
        for th in clause_violations(c, base, consts, cap):
            out.append((c, th))
    out.sort(key=lambda ct: (str(ct[0]), sorted((v.name, str(t)) for v, t in ct[1].items())))
    return out


def interpretation(*atoms) -> Interpretation:
    return Interpretation(frozenset(atoms))
