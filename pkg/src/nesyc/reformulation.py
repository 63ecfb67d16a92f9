"""Rule reformulation: experiences in, generalized action knowledge out.

Transitions are turned into labelled interpretations, a pluggable generator
proposes constraint programs batch by batch, every candidate is scored with HI
over the full example set and the best one is fed back for the next pass.
Effect rules are lifted separately from the state diffs of successful actions.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .domain import (
    HOUSEHOLD,
    Domain,
    GeneralizedKnowledge,
    action_atom,
    frame_bk,
    inertia_rules,
)
from .errors import InconsistentEffects, MalformedTransition, NoCandidates, VocabularyMiss
from .interpretation import Example, Interpretation, solutions
from .logic import (
    Atom,
    Clause,
    Compound,
    Constant,
    Literal,
    Program,
    Variable,
    match_atom,
)
from .lptext import ACTION_PREDICATE, TIME_VAR, print_program
from .scoring import CoverageCache, HiScore, ScoringParams, confusion, hi, select_best

log = logging.getLogger(__name__)

SATISFY, REVISE = "Satisfy", "Revise"
_PREV = Compound("-", (TIME_VAR, Constant("1")))


@dataclass(frozen=True)
class Transition:
    """One attempted action; states are time-free sets of ground atoms."""

    pre_state: Interpretation
    action: Atom
    post_state: Interpretation
    affordance: int

    def __post_init__(self):
        if self.affordance not in (0, 1):
            raise MalformedTransition(f"affordance must be 0 or 1, got {self.affordance!r}")
        if not isinstance(self.action, Atom) or not self.action.is_ground():
            raise MalformedTransition(f"action must be a ground atom, got {self.action}")


@dataclass
class ExperienceSet:
    records: list = field(default_factory=list)  # [(trajectory id, [Transition])]
    origin: str = "T"

    def add(self, traj_id: str, transitions: Iterable[Transition]) -> None:
        self.records.append((str(traj_id), list(transitions)))

    def extend(self, other: "ExperienceSet") -> None:
        for tid, trs in other.records:
            self.add(tid, trs)

    def copy(self) -> "ExperienceSet":
        return ExperienceSet([(t, list(trs)) for t, trs in self.records], self.origin)

    def transitions(self):
        for tid, trs in self.records:
            for i, tr in enumerate(trs):
                yield f"{tid}:{i}", i, tr

    def __len__(self):
        return sum(len(trs) for _, trs in self.records)


@dataclass(frozen=True)
class GeneratorFeedback:
    kind: str
    hi: Optional[HiScore] = None
    false_positives: tuple = ()
    false_negatives: tuple = ()
    message: str = ""


@dataclass
class ReformulationConfig:
    batch_size: int = 6
    itermax: int = 3
    generator: object = None  # None -> EnumerativeGenerator over the domain
    scoring: ScoringParams = field(default_factory=ScoringParams)
    rng_seed: int = 0
    max_body_len: int = 2
    max_clauses: int = 8

    def __post_init__(self):
        if self.batch_size < 1 or self.itermax < 1:
            raise ValueError("batch_size and itermax must be >= 1")

    def make_generator(self, domain: Domain):
        if self.generator is None:
            self.generator = EnumerativeGenerator(domain, self.max_body_len, self.max_clauses)
        return self.generator


class HypothesisGenerator(Protocol):
    def start(self, examples: Sequence[Example]) -> None: ...

    def __call__(self, batch: Sequence[Example], current_h: Program,
                 feedback: Optional[GeneratorFeedback]) -> tuple: ...


# --- translation ------------------------------------------------------------

def translate_transition(tr: Transition, step: int, domain: Domain = HOUSEHOLD,
                         origin: str = "T", ex_id: str = "") -> Example:
    schema = domain.schemas.get(tr.action.predicate)
    if schema is None or schema.action.arity != tr.action.arity:
        raise MalformedTransition(f"{tr.action} is not a registered action schema")
    atoms = {domain.tag(a, step) for a in tr.pre_state.atoms}
    atoms.add(action_atom(tr.action, step + 1))
    return Example(Interpretation(frozenset(atoms)), bool(tr.affordance), origin, ex_id)


def translate_experiences(xs, domain: Domain = HOUSEHOLD) -> list:
    """One example per transition: pre-state tagged at t, action tagged at t+1."""
    if xs is None:
        return []
    origin = getattr(xs, "origin", "T")
    return [translate_transition(tr, i, domain, origin, ex_id)
            for ex_id, i, tr in xs.transitions()]


def positive_transitions(*sets) -> list:
    return [tr for xs in sets if xs is not None for _, _, tr in xs.transitions() if tr.affordance]


# --- enumerative generator ---------------------------------------------------

@dataclass(frozen=True)
class _Lit:
    literal: Literal
    fresh: bool


class EnumerativeGenerator:
    """Deterministic stand-in for an LLM hypothesis generator.

    For each action schema it enumerates typed literals over the action's
    variables (plus one existential variable in positive literals), keeps
    single literals and pairs that no positive example satisfies, and picks a
    greedy cover of the negatives seen so far. Feedback is ignored.
    """

    def __init__(self, domain: Domain = HOUSEHOLD, max_body_len: int = 2, max_clauses: int = 8):
        self.domain = domain
        self.max_body_len = max_body_len
        self.max_clauses = max_clauses
        self.bk = frame_bk(domain)
        self.cache = CoverageCache(self.bk)
        self._truth: dict = {}
        self._lits = {name: self._literals(name) for name in domain.schemas}
        self._seen: dict = {}

    def start(self, examples: Sequence[Example] = ()) -> None:
        self._seen = {}

    def __call__(self, batch, current_h=None, feedback=None):
        for e in batch:
            self._check_vocabulary(e)
            self._seen[(e.id, e)] = e
        return [self.hypothesis(list(self._seen.values()))], self.bk

    def _check_vocabulary(self, e: Example):
        for a in e.interp.atoms:
            if not self.domain.knows(a.predicate):
                raise VocabularyMiss(f"predicate {a.predicate}/{a.arity} is not in the vocabulary")

    # literal space
    def _literals(self, schema: str) -> list:
        ch = self.domain.schemas[schema]
        types = self.domain.action_types(schema)
        by_type: dict = {}
        for v in ch.action.args:
            by_type.setdefault(types.get(v), []).append(v)
        out = []
        preds = [(p, n, True) for p, n in sorted(self.domain.fluents.items())]
        preds += [(p, 1, False) for p in self.domain.learnable]
        for p, n, timed in preds:
            slot_types = self.domain.arg_types(p) or (None,) * n
            options = []
            for t in slot_types:
                fresh = Variable(f"{(t or 'x')[0].upper()}2")
                options.append([(v, False) for v in by_type.get(t, [])]
                               + ([(fresh, True)] if timed else []))
            for combo in itertools.product(*options):
                n_fresh = sum(f for _, f in combo)
                if n_fresh > 1:
                    continue
                args = tuple(v for v, _ in combo) + ((TIME_VAR,) if timed else ())
                a = Atom(p, args)
                out.append(_Lit(Literal(a), bool(n_fresh)))
                if not n_fresh:
                    out.append(_Lit(Literal(a, naf=True), False))
        return out

    def _action_literal(self, schema: str) -> Literal:
        return Literal(action_atom(self.domain.schemas[schema].action, TIME_VAR))

    def _binding(self, schema: str, e: Example) -> Optional[dict]:
        pattern = self._action_literal(schema).atom
        for a in e.interp.index.get((ACTION_PREDICATE, 2), ()):
            th = match_atom(pattern, a)
            if th is not None:
                return th
        return None

    def _truth_row(self, schema: str, e: Example) -> np.ndarray:
        key = (schema, e)
        row = self._truth.get(key)
        if row is None:
            theta = self._binding(schema, e)
            base = self.cache.base(e)
            row = np.array([next(solutions([l.literal], base.closure, theta, base.constants),
                                 None) is not None for l in self._lits[schema]], dtype=bool)
            self._truth[key] = row
        return row

    def hypothesis(self, examples: Sequence[Example]) -> Program:
        clauses = []
        for schema in sorted(self.domain.schemas):
            mine = [e for e in examples if self._binding(schema, e) is not None]
            clauses.extend(self._cover(schema, mine))
        return Program(tuple(clauses))

    def _cover(self, schema: str, examples: list) -> list:
        pos = [e for e in examples if e.positive]
        neg = [e for e in examples if not e.positive]
        if not neg:
            return []
        lits = self._lits[schema]
        P = (np.array([self._truth_row(schema, e) for e in pos]).T if pos
             else np.zeros((len(lits), 0), dtype=bool))
        N = np.array([self._truth_row(schema, e) for e in neg]).T
        consistent = ~P.any(axis=1)
        cands = [((i,), N[i]) for i in np.flatnonzero(consistent) if N[i].any()]
        if self.max_body_len >= 2:
            rest = [i for i in np.flatnonzero(~consistent) if N[i].any()]
            for i, j in itertools.combinations(rest, 2):
                if lits[i].fresh and lits[j].fresh:
                    continue
                if lits[i].literal.atom == lits[j].literal.atom:
                    continue
                cov = N[i] & N[j]
                if cov.any() and not (P[i] & P[j]).any():
                    cands.append(((i, j), cov))
        head = self._action_literal(schema)
        made = [(Clause(None, (head,) + tuple(lits[k].literal for k in idx)), cov,
                 (len(idx), sum(lits[k].fresh for k in idx),
                  sum(not lits[k].literal.naf for k in idx)))
                for idx, cov in cands]
        # prefer short bodies, then no existential variables, then negated literals
        made.sort(key=lambda cc: cc[2] + (str(cc[0]),))
        made = [(c, cov) for c, cov, _ in made]
        chosen = []
        uncovered = np.ones(len(neg), dtype=bool)
        while uncovered.any() and len(chosen) < self.max_clauses:
            gains = [int((cov & uncovered).sum()) for _, cov in made]
            if not gains or max(gains) == 0:
                break
            k = gains.index(max(gains))  # first max wins: shorter, then canonical
            chosen.append(made[k])
            uncovered &= ~made[k][1]
        # drop clauses made redundant by later picks
        for c in list(reversed(chosen)):
            others = [cv for cc, cv in chosen if cc is not c[0]]
            if others:
                total = np.logical_or.reduce(others)
                if not (c[1] & ~total).any():
                    chosen.remove(c)
        return [c for c, _ in chosen]


class FixedGenerator:
    """Offers a fixed candidate list regardless of the batch (e.g. a known hypothesis space)."""

    def __init__(self, candidates: Iterable[Program], bk: Program = Program()):
        self.candidates = list(candidates)
        self.bk = bk

    def start(self, examples=()):
        pass

    def __call__(self, batch, current_h=None, feedback=None):
        return list(self.candidates), self.bk


def enumerative_generate(batch: Sequence[Example], cfg: Optional[ReformulationConfig] = None,
                         current_h: Program = Program(), fb: Optional[GeneratorFeedback] = None,
                         domain: Domain = HOUSEHOLD) -> list:
    cfg = cfg or ReformulationConfig()
    gen = EnumerativeGenerator(domain, cfg.max_body_len, cfg.max_clauses)
    gen.start(batch)
    return gen(batch, current_h, fb)[0]


# --- interpretation loop ------------------------------------------------------

@dataclass
class LoopTrace:
    passes: list = field(default_factory=list)  # per pass: dict of scores
    accepted: Optional[Program] = None
    accepted_hi: Optional[HiScore] = None
    bk: Program = Program()

    @property
    def first_step_best(self) -> float:
        return self.passes[0]["pass_best_hi"] if self.passes else float("-inf")


def _feedback(kind: str, best: Program, examples, bk, params, cache) -> GeneratorFeedback:
    counts = confusion(best, examples, bk, cache)
    s = hi(counts, params)
    fps, fns = tuple(counts.false_positives[:10]), tuple(counts.false_negatives[:10])
    by_id = {e.id: e for e in examples}
    lines = [f"HI = {s.value:.4f} (TPR {s.tpr:.3f}, FPR {s.fpr:.3f})"]
    for label, ids in (("wrongly allowed", fps), ("wrongly forbidden", fns)):
        for i in ids:
            lines.append(f"{label}: {by_id[i].interp}")
    return GeneratorFeedback(kind, s, fps, fns, "\n".join(lines))


def interpret_loop(examples: Sequence[Example], seed_h: Optional[Program],
                   cfg: ReformulationConfig, generator, bk: Program = Program()) -> LoopTrace:
    """Batched generate-and-score passes; accepts the HI argmax over every pass."""
    examples = list(examples)
    rng = np.random.default_rng(cfg.rng_seed)
    generator.start(examples)
    pool: list = []
    current = seed_h if seed_h is not None else Program()
    fb: Optional[GeneratorFeedback] = None
    trace = LoopTrace(bk=bk)
    cache = None
    for i in range(1, cfg.itermax + 1):
        fresh = []
        order = rng.permutation(len(examples)) if examples else []
        for start in range(0, len(order), cfg.batch_size):
            batch = [examples[j] for j in order[start:start + cfg.batch_size]]
            hs, extra = generator(batch, current, fb)
            if extra and any(c not in set(trace.bk.clauses) for c in extra.clauses):
                trace.bk = trace.bk.union(extra)
                cache = None
            fresh.extend(hs)
        pool.extend(fresh)
        ranked = list(dict.fromkeys(pool + ([seed_h] if seed_h is not None else [])))
        if not ranked:
            continue
        if cache is None:
            cache = CoverageCache(trace.bk)
        scored = [(h, hi(confusion(h, examples, trace.bk, cache), cfg.scoring)) for h in ranked]
        best = select_best(scored)
        pass_best = max((s.value for h, s in scored if h in set(fresh)), default=float("-inf"))
        trace.passes.append({"pass": i, "candidates": len(fresh),
                             "pass_best_hi": pass_best,
                             "accepted_hi": dict(scored)[best].value})
        trace.accepted, trace.accepted_hi = best, dict(scored)[best]
        current = best
        fb = _feedback(SATISFY if i == cfg.itermax else REVISE, best, examples,
                       trace.bk, cfg.scoring, cache)
        log.debug("pass %d: %d candidates, accepted HI %.4f", i, len(fresh), trace.accepted_hi.value)
    if trace.accepted is None:
        raise NoCandidates("the generator produced no hypotheses in any pass")
    return trace


# --- effects ------------------------------------------------------------------

def _lift(a: Atom, binding: dict, placeholders: dict) -> Atom:
    args = []
    for t in a.args:
        if t in binding:
            args.append(binding[t])
        else:
            if t not in placeholders:
                placeholders[t] = Variable(f"P{len(placeholders) + 1}")
            args.append(placeholders[t])
    return Atom(a.predicate, tuple(args))


def _bound(pattern: Atom, action_vars) -> bool:
    return all(v in action_vars for v in pattern.variables())


def extract_effects(positives: Iterable[Transition], domain: Domain = HOUSEHOLD,
                    diagnostics: Optional[list] = None, strict: bool = False) -> Program:
    """Lift the add and delete sets shared by every successful use of each schema."""
    by_schema: dict = {}
    for tr in positives:
        if tr.affordance:
            by_schema.setdefault(tr.action.predicate, []).append(tr)
    clauses = []
    for name in sorted(by_schema):
        ch = domain.schemas.get(name)
        if ch is None:
            raise MalformedTransition(f"unknown action schema {name}")
        trs = by_schema[name]
        avars = ch.action.args
        act = Literal(action_atom(ch.action, TIME_VAR))
        adds, dels = set(), set()
        inv = []
        for tr in trs:
            binding = {}
            for v, c in zip(avars, tr.action.args):
                binding.setdefault(c, v)
            theta = {v: c for c, v in binding.items()}
            inv.append(theta)
            pre = {a for a in tr.pre_state.atoms if domain.is_fluent(a)}
            post = {a for a in tr.post_state.atoms if domain.is_fluent(a)}
            for a in post - pre:
                lifted = _lift(a, binding, {})
                if _bound(lifted, avars):
                    adds.add(lifted)
            for a in pre - post:
                dels.add(_lift(a, binding, {}))
        add_ok = sorted((p for p in adds if all(
            Atom(p.predicate, tuple(th.get(t, t) for t in p.args)) in tr.post_state.atoms
            for tr, th in zip(trs, inv))), key=str)
        del_ok = []
        for p in sorted(dels, key=str):
            good = True
            for tr, th in zip(trs, inv):
                for a in tr.pre_state.index.get((p.predicate, p.arity), ()):
                    if match_atom(p, a, th) is not None and a in tr.post_state.atoms:
                        good = False
                        break
                if not good:
                    break
            if good:
                del_ok.append(p)
        if not add_ok and not del_ok:
            msg = f"no common effect for {name} over {len(trs)} successful transitions"
            if diagnostics is not None:
                diagnostics.append(msg)
            log.info(msg)
            if strict:
                raise InconsistentEffects(msg)
            continue
        for p in add_ok:
            clauses.append(Clause(Atom(p.predicate, p.args + (TIME_VAR,)), (act,)))
        for p in del_ok:
            head = Atom(f"del_{p.predicate}", p.args + (TIME_VAR,))
            body = (act,)
            if not _bound(p, avars):
                body += (Literal(Atom(p.predicate, p.args + (_PREV,))),)
            clauses.append(Clause(head, body))
    return Program(tuple(clauses))


# --- top level ------------------------------------------------------------------

def reformulate(t_set: ExperienceSet, seed_h=None, cfg: Optional[ReformulationConfig] = None,
                domain: Domain = HOUSEHOLD, memory: Optional[ExperienceSet] = None,
                trace_out: Optional[list] = None) -> GeneralizedKnowledge:
    """Learn preconditions by the scored generate-and-select loop; attach lifted effects."""
    cfg = cfg or ReformulationConfig()
    seed_effects = Program()
    if isinstance(seed_h, GeneralizedKnowledge):
        seed_effects, seed_h = seed_h.effects, seed_h.constraints
    examples = translate_experiences(t_set, domain) + translate_experiences(memory, domain)
    generator = cfg.make_generator(domain)
    bk = getattr(generator, "bk", Program())
    if examples:
        trace = interpret_loop(examples, seed_h, cfg, generator, bk)
        constraints = trace.accepted
    elif seed_h is not None:
        trace, constraints = LoopTrace(accepted=seed_h), seed_h
    else:
        raise NoCandidates("no experiences and no seed hypothesis")
    if trace_out is not None:
        trace_out.append(trace)
    positives = positive_transitions(t_set, memory)
    effects = extract_effects(positives, domain)
    # schemas never seen succeeding keep the effects they came in with
    seen = {tr.action.predicate for tr in positives}
    kept = tuple(c for c in seed_effects.clauses if _effect_schema(c) not in seen)
    if kept:
        effects = effects.union(Program(kept))
    provenance = tuple((p["pass"], round(p["accepted_hi"], 6)) for p in trace.passes)
    return GeneralizedKnowledge(constraints, effects, inertia_rules(domain.fluents),
                                domain.actions, dict(domain.fluents), Program(), provenance)


def _effect_schema(c) -> Optional[str]:
    for lit in c.body:
        a = lit.atom
        if lit.positive and a.predicate == ACTION_PREDICATE and a.args and isinstance(a.args[0], Compound):
            return a.args[0].functor
    return None


def knowledge_text(k: GeneralizedKnowledge) -> str:
    return print_program(k.program())
