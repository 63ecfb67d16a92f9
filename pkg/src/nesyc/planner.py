"""Breadth-first planning over learned action knowledge.

A state is a set of time-free fluents. To test an action the state is laid
out at time 0 and again at time 1 (so preconditions can be written against
either tag), the action is placed at time 1, and the constraints are checked.
Successors come from one stratified evaluation of effect and frame rules;
fluents whose predicate has no frame rule persist by default.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .domain import GeneralizedKnowledge, action_atom, unwrap_action
from .interpretation import DEFAULT_CAP, Interpretation, fixpoint, solutions, stratify
from .logic import (
    ActionChoice,
    Atom,
    Clause,
    Compound,
    Constant,
    Literal,
    Program,
    Variable,
    apply_substitution,
    constants_of,
    match_atom,
)
from .lptext import ACTION_PREDICATE, TIME_VAR, parse

T0, T1 = Constant("0"), Constant("1")


@dataclass(frozen=True)
class State:
    fluents: frozenset = frozenset()

    def __post_init__(self):
        fl = frozenset(self.fluents)
        for a in fl:
            if not a.is_ground():
                raise ValueError(f"state fluents must be ground, got {a}")
        object.__setattr__(self, "fluents", fl)

    def __contains__(self, a):
        return a in self.fluents

    def __iter__(self):
        return iter(sorted(self.fluents, key=str))

    def __str__(self):
        return "{" + ", ".join(str(a) for a in self) + "}"


@dataclass(frozen=True, order=True)
class GroundAction:
    schema: str
    args: tuple = ()

    @classmethod
    def of(cls, a: Atom) -> "GroundAction":
        return cls(a.predicate, tuple(a.args))

    @classmethod
    def parse(cls, text: str) -> "GroundAction":
        from .lptext import parse_atom
        return cls.of(parse_atom(text))

    @property
    def atom(self) -> Atom:
        return Atom(self.schema, self.args)

    def __str__(self):
        return str(self.atom)


@dataclass(frozen=True)
class Plan:
    actions: tuple = ()

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)


@dataclass
class PlanningProblem:
    knowledge: GeneralizedKnowledge
    initial: State
    goal: Program
    statics: frozenset = frozenset()
    objects: Optional[frozenset] = None  # restrict groundings to these constants
    horizon: int = 10

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        for c in self.goal.clauses:
            if c.head is None or c.head.predicate != "goal":
                raise ValueError(f"goal rules must have head goal(T), got {c}")


def _tag(a: Atom, t: Constant) -> Atom:
    return Atom(a.predicate, a.args + (t,))


def _action_literal(c: Clause) -> Optional[Literal]:
    for lit in c.body:
        if lit.positive and lit.atom.predicate == ACTION_PREDICATE and lit.atom.arity == 2:
            return lit
    return None


def _earlier(lit: Literal) -> bool:
    """Literal about a previous step (time argument of the form T-k)."""
    args = lit.atom.args
    return bool(args) and isinstance(args[-1], Compound) and args[-1].functor == "-"


def _self_dependent(rules: list) -> bool:
    heads = {r.head.predicate for r in rules}
    return any(l.atom.predicate in heads and not _earlier(l) for r in rules for l in r.body)


def _schema_of(lit: Optional[Literal]) -> Optional[str]:
    if lit is None:
        return None
    inner = lit.atom.args[0]
    if isinstance(inner, Compound):
        return inner.functor
    if isinstance(inner, Constant):
        return inner.name
    return None


class _Scratch:
    """Growable atom set with the (predicate, arity) index the matcher expects."""

    def __init__(self, other: Optional["_Scratch"] = None):
        self.atoms = set(other.atoms) if other else set()
        self.index = {k: list(v) for k, v in other.index.items()} if other else {}

    def add(self, a: Atom) -> None:
        if a not in self.atoms:
            self.atoms.add(a)
            self.index.setdefault((a.predicate, a.arity), []).append(a)


class Planner:
    """Caches groundings, applicability and successors for one knowledge base."""

    def __init__(self, knowledge: GeneralizedKnowledge, statics: Iterable[Atom] = (),
                 objects: Optional[Iterable] = None, cap: int = DEFAULT_CAP):
        self.k = knowledge
        self.cap = cap
        static_rules = [c for c in knowledge.statics.clauses if c.head is not None]
        self.statics = fixpoint(static_rules, set(statics), cap=cap)
        self.static_interp = Interpretation(self.statics)
        self.objects = None if objects is None else frozenset(
            o if isinstance(o, Constant) else Constant(str(o)) for o in objects)
        self.constants = frozenset(constants_of(self.statics)) | frozenset(
            constants_of(knowledge.program().clauses))
        self.fluent_preds = {p for p in knowledge.fluents}
        self.framed = {c.head.predicate for c in knowledge.inertia.clauses}
        self._by_schema: dict = {}
        self._global: list = []
        for i, c in enumerate(knowledge.constraints.clauses):
            lit = _action_literal(c)
            if lit is None:
                self._global.append((i, c))
            else:
                rest = tuple(l for l in c.body if l is not lit)
                self._by_schema.setdefault(_schema_of(lit), []).append((i, lit.atom, rest))
        rules = [c for c in knowledge.effects.clauses + knowledge.inertia.clauses
                 if c.head is not None]
        self.strata = stratify(rules, ignore=_earlier)
        self._recursive = [_self_dependent(st) for st in self.strata]
        self._applicable: dict = {}
        self._succ: dict = {}
        self._bases: dict = {}
        self._groundings = self._ground_actions()

    # --- groundings
    def _ground_actions(self) -> list:
        out = set()
        for ch in self.k.choices:
            vars_ = list(dict.fromkeys(ch.action.variables()))
            conds = [l for l in ch.conditions]
            for th in solutions(conds, self.static_interp, constants=self.constants,
                                extra_vars=vars_, cap=self.cap):
                args = tuple(th.get(a, a) if isinstance(a, Variable) else a for a in ch.action.args)
                if self.objects is not None and not all(a in self.objects for a in args):
                    continue
                out.add(GroundAction(ch.action.predicate, args))
        return sorted(out, key=str)

    @property
    def actions(self) -> list:
        return list(self._groundings)

    def ordered_actions(self, s: State) -> list:
        """Canonical order: actions whose arguments match some fluent's arguments first."""
        arg_sets = {tuple(f.args) for f in s.fluents}
        return sorted(self._groundings, key=lambda a: (tuple(a.args) not in arg_sets, str(a)))

    # --- evaluation
    def _base(self, s: State) -> Interpretation:
        b = self._bases.get(s)
        if b is None:
            atoms = set(self.statics)
            for f in s.fluents:
                atoms.add(_tag(f, T0))
                atoms.add(_tag(f, T1))
            b = Interpretation(frozenset(atoms))
            self._bases[s] = b
        return b

    def _pre_base(self, s: State) -> "_Scratch":
        key = ("pre", s)
        b = self._bases.get(key)
        if b is None:
            b = _Scratch()
            for x in self.statics:
                b.add(x)
            for f in s.fluents:
                b.add(_tag(f, T0))
            self._bases[key] = b
        return b

    def applicable(self, s: State, a: GroundAction, allowed: frozenset = frozenset()) -> bool:
        """True when every constraint ``a`` violates in ``s`` has its index in ``allowed``."""
        return self.violated(s, a) <= allowed

    def violated(self, s: State, a: GroundAction) -> frozenset:
        """Indices (into the constraint program) of the constraints ``a`` violates in ``s``."""
        key = (s, a)
        hit = self._applicable.get(key)
        if hit is None:
            hit = frozenset(i for i, _, _ in self._violations(s, a))
            self._applicable[key] = hit
        return hit

    def violations(self, s: State, a: GroundAction) -> list:
        return [(pattern, rest) for _, pattern, rest in self._violations(s, a)]

    def _violations(self, s: State, a: GroundAction) -> list:
        base = self._base(s)
        act = action_atom(a.atom, T1)
        out = []
        for i, pattern, rest in self._by_schema.get(a.schema, ()):
            theta = match_atom(pattern, act)
            if theta is None:
                continue
            if next(solutions(rest, base, theta, self.constants, cap=self.cap), None) is not None:
                out.append((i, pattern, rest))
        if self._global:
            full = base.union([act])
            for i, c in self._global:
                if next(solutions(c.body, full, {}, self.constants, cap=self.cap), None) is not None:
                    out.append((i, None, c.body))
        return out

    def successor(self, s: State, a: GroundAction) -> State:
        key = (s, a)
        hit = self._succ.get(key)
        if hit is not None:
            return hit
        work = _Scratch(self._pre_base(s))
        work.add(action_atom(a.atom, T1))
        schema = a.schema
        for stratum, recursive in zip(self.strata, self._recursive):
            rules = [r for r in stratum if _schema_of(_action_literal(r)) in (None, schema)]
            while rules:
                new = set()
                for r in rules:
                    # evaluate one step only: pin the head's time argument to 1
                    t = r.head.args[-1] if r.head.args else None
                    pin = {t: T1} if isinstance(t, Variable) else {}
                    for th in solutions(r.body, work, pin, self.constants,
                                        extra_vars=list(r.head.variables()), cap=self.cap):
                        g = apply_substitution(r.head, th)
                        if g not in work.atoms:
                            new.add(g)
                for g in new:
                    work.add(g)
                if not new or not recursive:
                    break
        current = work.atoms
        nxt = set()
        for atom in current:
            if atom.arity and atom.args[-1] == T1 and atom.predicate in self.fluent_preds \
                    and self.k.fluents.get(atom.predicate) == atom.arity - 1:
                nxt.add(Atom(atom.predicate, atom.args[:-1]))
        for f in s.fluents:
            if f.predicate not in self.framed:
                nxt.add(f)
        out = State(frozenset(nxt))
        self._succ[key] = out
        return out

    def goal_satisfied(self, s: State, goal: Program) -> bool:
        if not goal.clauses:
            return False
        base = self._base(s)
        for c in goal.clauses:
            theta = {}
            if c.head.arity == 1 and isinstance(c.head.args[0], Variable):
                theta[c.head.args[0]] = T0
            if not c.body:
                return True
            if next(solutions(c.body, base, theta, self.constants, cap=self.cap), None) is not None:
                return True
        return False

    def plan(self, initial: State, goal: Program, horizon: int,
             allowed: frozenset = frozenset()) -> Optional[Plan]:
        """Shortest plan by BFS with visited-state pruning; None when none fits the horizon.

        Constraints whose indices are in ``allowed`` are ignored.
        """
        if self.goal_satisfied(initial, goal):
            return Plan(())
        parent = {initial: None}
        level = [initial]
        for _ in range(horizon):
            nxt_level = []
            for s in level:
                for a in self.ordered_actions(s):
                    if not self.applicable(s, a, allowed):
                        continue
                    s2 = self.successor(s, a)
                    if s2 in parent:
                        continue
                    parent[s2] = (s, a)
                    if self.goal_satisfied(s2, goal):
                        return Plan(tuple(_unwind(parent, s2)))
                    nxt_level.append(s2)
            if not nxt_level:
                break
            level = nxt_level
        return None


def _unwind(parent: dict, s: State) -> list:
    out = []
    while parent[s] is not None:
        s, a = parent[s]
        out.append(a)
    return out[::-1]


# --- functional front end ---------------------------------------------------------

def applicable(s: State, a: GroundAction, constraints: Program, statics: Iterable[Atom] = ()) -> bool:
    k = GeneralizedKnowledge(constraints=constraints)
    return Planner(k, statics).applicable(s, a)


def successor(s: State, a: GroundAction, k: GeneralizedKnowledge, statics: Iterable[Atom] = ()) -> State:
    return Planner(k, statics).successor(s, a)


def goal_satisfied(s: State, goal: Program, statics: Iterable[Atom] = ()) -> bool:
    return Planner(GeneralizedKnowledge(), statics).goal_satisfied(s, goal)


def plan(p: PlanningProblem, planner: Optional[Planner] = None) -> Optional[Plan]:
    planner = planner or Planner(p.knowledge, p.statics, p.objects)
    return planner.plan(p.initial, p.goal, p.horizon)


# --- loading holds/occurs style programs ---------------------------------------------

def _flatten(a: Atom, fluents: dict, when) -> Atom:
    """holds(f(x), T) -> f(x, T); a bare fluent f(x) is read at time ``when``."""
    if a.predicate == "holds" and a.arity == 2 and isinstance(a.args[0], (Compound, Constant)):
        inner = a.args[0]
        args = inner.args if isinstance(inner, Compound) else ()
        name = inner.functor if isinstance(inner, Compound) else inner.name
        return Atom(name, tuple(args) + (a.args[1],))
    if when is not None and fluents.get(a.predicate) == a.arity:
        return Atom(a.predicate, a.args + (when,))
    return a


def _fluent_signatures(p: Program) -> dict:
    out: dict = {}
    for c in p.clauses:
        for a in c.atoms():
            if a.predicate in ("holds", "init", "goal") and a.args and isinstance(a.args[0], Compound):
                out.setdefault(a.args[0].functor, len(a.args[0].args))
    return out


def load_problem(text: str, horizon: int = 3) -> PlanningProblem:
    """Build a planning problem from a holds/occurs/init/goal style rule file."""
    prog = parse(text)
    fluents = _fluent_signatures(prog)
    statics, init, goals = set(), set(), []
    static_rules, constraints, effects, inertia = [], [], [], []
    for c, sec in zip(prog.clauses, prog.sections):
        if c.is_fact and c.head.predicate == "init":
            f = c.head.args[0]
            init.add(Atom(f.functor, f.args) if isinstance(f, Compound) else Atom(f.name, ()))
            continue
        if c.is_fact and c.head.predicate == "goal" and c.head.arity == 1 \
                and not isinstance(c.head.args[0], Variable):
            f = c.head.args[0]
            g = Atom(f.functor, f.args + (TIME_VAR,)) if isinstance(f, Compound) else Atom(f.name, (TIME_VAR,))
            goals.append(Clause(Atom("goal", (TIME_VAR,)), (Literal(g),)))
            continue
        if sec.startswith("check"):
            continue  # goal test is handled by the search
        if any(a.predicate == "init" for a in c.atoms()):
            continue  # holds(F,0) :- init(F): the initial state is given directly
        if sec == "base":
            if c.is_fact and fluents.get(c.head.predicate) == c.head.arity:
                init.add(c.head)
            elif c.is_fact:
                statics.add(c.head)
            else:
                static_rules.append(c)
            continue
        head = _flatten(c.head, fluents, TIME_VAR) if c.head is not None else None
        body = tuple(Literal(_flatten(l.atom, fluents, TIME_VAR), l.naf) for l in c.body)
        clause = Clause(head, body)
        if clause.is_constraint:
            constraints.append(clause)
        elif any(l.positive and l.atom.predicate == head.predicate for l in body):
            inertia.append(clause)
        else:
            effects.append(clause)
    k = GeneralizedKnowledge(Program(tuple(constraints)), Program(tuple(effects)),
                             Program(tuple(inertia)), tuple(prog.choices), fluents,
                             Program(tuple(static_rules)))
    return PlanningProblem(k, State(frozenset(init)), Program(tuple(goals)),
                           frozenset(statics), None, horizon)
