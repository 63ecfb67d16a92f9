"""Predicate vocabulary and the learned-knowledge container.

Fluents are time-indexed: ``at(apple, fridge)`` in a state becomes
``at(apple, fridge, 3)`` in an example or planning base. Static predicates
(attributes, types) never carry a time argument. Actions appear as
``action(pick_up(apple, fridge), T)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .logic import (
    ActionChoice,
    Atom,
    Clause,
    Compound,
    Constant,
    Literal,
    Program,
    Variable,
    variant_key,
)
from .lptext import ACTION_PREDICATE, TIME_VAR, parse, print_program


@dataclass(frozen=True)
class Domain:
    """Registered fluents, static predicates and action schemas.

    ``types`` maps a predicate to the type of each non-time argument; it lets
    the hypothesis enumerator skip ill-typed literals such as ``at(L, O, T)``.
    """

    fluents: dict
    statics: dict
    actions: tuple
    types: dict = field(default_factory=dict)
    learnable: tuple = ()  # static predicates offered to the rule enumerator

    def __hash__(self):
        return hash((tuple(sorted(self.fluents.items())), self.actions))

    @property
    def schemas(self) -> dict:
        return {ch.action.predicate: ch for ch in self.actions}

    def is_fluent(self, a: Atom) -> bool:
        return self.fluents.get(a.predicate) == a.arity

    def is_static(self, a: Atom) -> bool:
        return a.predicate in self.statics or (
            a.predicate.startswith("is_") and a.arity == 1 and a.predicate not in self.fluents)

    def knows(self, predicate: str) -> bool:
        return (predicate in self.fluents or predicate in self.statics
                or predicate == ACTION_PREDICATE or predicate.startswith("is_"))

    def tag(self, a: Atom, t: int) -> Atom:
        if self.is_fluent(a):
            return Atom(a.predicate, a.args + (Constant(str(t)),))
        return a

    def untag(self, a: Atom) -> Atom:
        if self.fluents.get(a.predicate) == a.arity - 1:
            return Atom(a.predicate, a.args[:-1])
        return a

    def arg_types(self, predicate: str) -> tuple:
        return self.types.get(predicate, ())

    def action_types(self, schema: str) -> dict:
        """Variable -> type for a schema, read off its generator conditions."""
        ch = self.schemas[schema]
        out = {}
        for lit in ch.conditions:
            a = lit.atom
            if a.arity == 1 and isinstance(a.args[0], Variable) and not lit.naf:
                out[a.args[0]] = a.predicate
        return out


def action_atom(action: Atom, t) -> Atom:
    """``pick_up(o, l)`` -> ``action(pick_up(o, l), t)``."""
    inner = Compound(action.predicate, action.args) if action.args else Constant(action.predicate)
    tt = t if isinstance(t, (Variable, Constant, Compound)) else Constant(str(t))
    return Atom(ACTION_PREDICATE, (inner, tt))


def unwrap_action(a: Atom) -> Optional[Atom]:
    """Inverse of action_atom, ignoring the time argument."""
    if a.predicate != ACTION_PREDICATE or a.arity != 2:
        return None
    inner = a.args[0]
    if isinstance(inner, Compound):
        return Atom(inner.functor, inner.args)
    if isinstance(inner, Constant):
        return Atom(inner.name, ())
    return None


def _vars(n: int, prefix: str = "X") -> tuple:
    return tuple(Variable(f"{prefix}{i + 1}") for i in range(n))


def frame_bk(domain: Domain) -> Program:
    """Background rules exposing pre-action fluents at the action's time step.

    ``p(X1, .., Xn, T) :- p(X1, .., Xn, T-1), action(A, T).``
    """
    prev = Compound("-", (TIME_VAR, Constant("1")))
    clauses = []
    for p, n in sorted(domain.fluents.items()):
        xs = _vars(n)
        clauses.append(Clause(
            Atom(p, xs + (TIME_VAR,)),
            (Literal(Atom(p, xs + (prev,))),
             Literal(Atom(ACTION_PREDICATE, (Variable("A"), TIME_VAR))))))
    return Program(tuple(clauses))


def inertia_rules(fluents: dict) -> Program:
    """``p(X.., T) :- p(X.., T-1), not del_p(X.., T).`` for every fluent."""
    prev = Compound("-", (TIME_VAR, Constant("1")))
    clauses = []
    for p, n in sorted(fluents.items()):
        xs = _vars(n)
        clauses.append(Clause(
            Atom(p, xs + (TIME_VAR,)),
            (Literal(Atom(p, xs + (prev,))),
             Literal(Atom(f"del_{p}", xs + (TIME_VAR,)), naf=True))))
    return Program(tuple(clauses))


@dataclass(frozen=True)
class GeneralizedKnowledge:
    """Learned action knowledge: preconditions, effects and the frame."""

    constraints: Program = Program()
    effects: Program = Program()
    inertia: Program = Program()
    choices: tuple = ()
    fluents: dict = field(default_factory=dict)
    statics: Program = Program()
    provenance: tuple = field(default=(), compare=False)

    def __hash__(self):
        return hash((self.constraints, self.effects, self.inertia))

    @property
    def clauses(self) -> list:
        return list(self.constraints.clauses) + list(self.effects.clauses) + list(self.inertia.clauses)

    def program(self) -> Program:
        return self.constraints.union(self.effects, self.inertia)

    def to_lp(self) -> str:
        return print_program(self.program())

    def with_constraints(self, constraints: Program, provenance=()) -> "GeneralizedKnowledge":
        return GeneralizedKnowledge(constraints, self.effects, self.inertia, self.choices,
                                    self.fluents, self.statics, tuple(provenance))

    @classmethod
    def from_program(cls, program: Program, domain: Domain) -> "GeneralizedKnowledge":
        """Split a flat rule file into constraints, effects and frame rules."""
        cons, eff, inert = [], [], []
        for c in program.clauses:
            if c.is_constraint:
                cons.append(c)
            elif c.head is not None and any(
                    l.atom.predicate == c.head.predicate and not l.naf for l in c.body):
                inert.append(c)
            else:
                eff.append(c)
        return cls(Program(tuple(cons)), Program(tuple(eff)), Program(tuple(inert)),
                   domain.actions, dict(domain.fluents))


def knowledge_f1(learned: Iterable[Clause], oracle: Iterable[Clause]) -> float:
    """F1 of clause-set overlap, comparing clauses up to variable renaming."""
    a = {variant_key(c) for c in learned}
    b = {variant_key(c) for c in oracle}
    if not a and not b:
        return 1.0
    hit = len(a & b)
    if hit == 0:
        return 0.0
    precision, recall = hit / len(a), hit / len(b)
    return 2 * precision * recall / (precision + recall)


def rule_delta(previous: Iterable[Clause], current: Iterable[Clause]) -> float:
    """Percent change between rule sets: (added + removed) / |previous| * 100.

    With an empty previous set the change is 100% if anything was added.
    """
    a = {variant_key(c) for c in previous}
    b = {variant_key(c) for c in current}
    changed = len(b - a) + len(a - b)
    if not a:
        return 100.0 if changed else 0.0
    return 100.0 * changed / len(a)


_HOUSEHOLD_ACTIONS = """
0 { action(go_to(L), T) : location(L) } 1.
0 { action(pick_up(O, L), T) : object(O), location(L) } 1.
0 { action(put_down(O, L), T) : object(O), location(L) } 1.
0 { action(open(L), T) : location(L) } 1.
0 { action(close(L), T) : location(L) } 1.
0 { action(heat(O, L), T) : object(O), location(L) } 1.
0 { action(cool(O, L), T) : object(O), location(L) } 1.
0 { action(clean(O, L), T) : object(O), location(L) } 1.
"""

HOUSEHOLD = Domain(
    fluents={"at": 2, "robot_at": 1, "holding": 1, "is_open": 1,
             "is_hot": 1, "is_cold": 1, "is_clean": 1},
    statics={"object": 1, "location": 1, "openable": 1, "heatable": 1, "coolable": 1,
             "cleanable": 1, "is_heater": 1, "is_cooler": 1, "is_cleaner": 1},
    actions=tuple(parse(_HOUSEHOLD_ACTIONS).choices),
    types={"at": ("object", "location"), "robot_at": ("location",), "holding": ("object",),
           "is_open": ("location",), "is_hot": ("object",), "is_cold": ("object",),
           "is_clean": ("object",), "openable": ("location",), "heatable": ("object",),
           "coolable": ("object",), "cleanable": ("object",), "is_heater": ("location",),
           "is_cooler": ("location",), "is_cleaner": ("location",)},
    learnable=("openable", "heatable", "coolable", "cleanable",
               "is_heater", "is_cooler", "is_cleaner"),
)
