"""Contrastive HI scoring and best-hypothesis selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import EmptyCandidates, NoExamples
from .interpretation import DEFAULT_CAP, Example, bk_closure, clause_violations
from .logic import Clause, Program, constants_of
from .lptext import print_program

ORIGINS = ("T", "M")


@dataclass(frozen=True)
class ScoringParams:
    alpha: float = 0.5
    lam: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "lam"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n_pos(self) -> int:
        return self.tp + self.fn

    @property
    def n_neg(self) -> int:
        return self.fp + self.tn


@dataclass
class ConfusionCounts:
    by_origin: dict = field(default_factory=lambda: {o: Counts() for o in ORIGINS})
    false_positives: list = field(default_factory=list)
    false_negatives: list = field(default_factory=list)

    def __getitem__(self, origin: str) -> Counts:
        return self.by_origin[origin]

    @property
    def total(self) -> Counts:
        out = Counts()
        for c in self.by_origin.values():
            out.tp += c.tp
            out.fp += c.fp
            out.tn += c.tn
            out.fn += c.fn
        return out


@dataclass(frozen=True)
class HiScore:
    value: float
    tpr: float
    fpr: float

    def __float__(self):
        return self.value


class CoverageCache:
    """Memoises BK closures per example and clause verdicts per (clause, example).

    Candidate programs share most of their clauses, so scoring many programs
    over the same example set reduces to a handful of clause checks.
    """

    def __init__(self, bk: Program = Program(), cap: int = DEFAULT_CAP):
        self.bk = bk
        self.cap = cap
        self._bases: dict = {}
        self._verdicts: dict = {}

    def base(self, e: Example):
        b = self._bases.get(e)
        if b is None:
            b = bk_closure(self.bk, e.interp, cap=self.cap)
            self._bases[e] = b
        return b

    def violates(self, c: Clause, e: Example) -> bool:
        key = (c, e)
        hit = self._verdicts.get(key)
        if hit is None:
            base = self.base(e)
            consts = base.constants | frozenset(constants_of([c]))
            hit = next(clause_violations(c, base, consts, self.cap), None) is not None
            self._verdicts[key] = hit
        return hit

    def is_model(self, h: Program, e: Example) -> bool:
        return not any(self.violates(c, e) for c in h.clauses)


def confusion(h: Program, examples: Iterable[Example], bk: Program = Program(),
              cache: Optional[CoverageCache] = None) -> ConfusionCounts:
    """Classify each example as model / non-model of h ∪ bk, split by origin."""
    cache = cache if cache is not None else CoverageCache(bk)
    out = ConfusionCounts()
    for e in examples:
        c = out.by_origin.setdefault(e.origin, Counts())
        model = cache.is_model(h, e)
        if e.positive:
            if model:
                c.tp += 1
            else:
                c.fn += 1
                out.false_negatives.append(e.id)
        elif model:
            c.fp += 1
            out.false_positives.append(e.id)
        else:
            c.tn += 1
    return out


def _weighted_rate(parts: Sequence, lam: float) -> float:
    # parts: [(hits, size) for T, (hits, size) for M]
    (h_t, n_t), (h_m, n_m) = parts
    if n_t and n_m:
        return lam * h_t / n_t + (1 - lam) * h_m / n_m
    if n_t:
        return h_t / n_t
    if n_m:
        return h_m / n_m
    return 0.0


def hi(counts: ConfusionCounts, params: ScoringParams = ScoringParams()) -> HiScore:
    """alpha * f_TPR - (1 - alpha) * f_FPR with lambda-weighted partitions.

    An empty partition hands its weight to the other one; a polarity with no
    examples at all contributes a rate of 0.
    """
    t, m = counts["T"], counts["M"]
    if not (t.n_pos or t.n_neg or m.n_pos or m.n_neg):
        raise NoExamples("cannot score a hypothesis without examples")
    tpr = _weighted_rate([(t.tp, t.n_pos), (m.tp, m.n_pos)], params.lam)
    fpr = _weighted_rate([(t.fp, t.n_neg), (m.fp, m.n_neg)], params.lam)
    return HiScore(params.alpha * tpr - (1 - params.alpha) * fpr, tpr, fpr)


def hi_unweighted(counts: ConfusionCounts) -> HiScore:
    """The plain TPR - FPR form over all examples, ignoring origin."""
    tot = counts.total
    if not (tot.n_pos or tot.n_neg):
        raise NoExamples("cannot score a hypothesis without examples")
    tpr = tot.tp / tot.n_pos if tot.n_pos else 0.0
    fpr = tot.fp / tot.n_neg if tot.n_neg else 0.0
    return HiScore(tpr - fpr, tpr, fpr)


def score(h: Program, examples, bk: Program = Program(), params: ScoringParams = ScoringParams(),
          cache: Optional[CoverageCache] = None) -> HiScore:
    return hi(confusion(h, examples, bk, cache), params)


def selection_key(candidate):
    prog, s = candidate
    value = s.value if isinstance(s, HiScore) else float(s)
    return (-round(value, 12), len(prog.clauses), prog.body_size(), print_program(prog))


def select_best(candidates: Iterable) -> Program:
    """Highest HI; ties go to fewer clauses, fewer body literals, then canonical text."""
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("select_best needs at least one candidate")
    return min(candidates, key=selection_key)[0]
