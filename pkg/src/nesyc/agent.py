"""Acting with learned knowledge: parse, plan, execute, check and refine.

Each environment step the agent folds the latest observation into its belief,
plans from the belief to the instruction's goal, executes the first planned
action and judges the outcome by comparing the observed change with the
effects its rules predict. A judged failure hands the step history to the
reformulation loop, seeded with the current rules.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

from .domain import HOUSEHOLD, GeneralizedKnowledge
from .envsim import (
    TEMPLATES,
    Instruction,
    ObservationRecord,
    World,
    fluents_of,
    goal_program,
    merge_observation,
    parse_observation,
    statics_of,
)
from .errors import EpisodeOver, PlannerStuck, UnknownTemplate
from .interpretation import Interpretation
from .logic import Atom, Constant, Program
from .planner import GroundAction, Planner, State
from .reformulation import ExperienceSet, ReformulationConfig, Transition, reformulate

log = logging.getLogger(__name__)

BINARY, CAUSE, GUIDANCE = "binary", "cause", "guidance"


# --- instructions --------------------------------------------------------------------

def _template_regex(text: str) -> re.Pattern:
    pat = re.escape(text)
    pat = pat.replace(re.escape("{article}"), r"(?:a\ few|an|a|the|some)")
    pat = pat.replace(re.escape("{obj}"), r"(?P<obj>[a-z ]+?)")
    pat = pat.replace(re.escape("{loc}"), r"(?P<loc>[a-z ]+?)")
    pat = pat.replace(r"\ in\ the\ ", r"\ (?:in|on|into|onto)\ the\ ")
    return re.compile(rf"^{pat}\.?$")


_PATTERNS = [(name, _template_regex(t)) for name, (t, _) in sorted(TEMPLATES.items())]


def _category(words: str) -> str:
    """'remote controls' -> 'remotecontrol'."""
    w = words.strip().replace(" ", "")
    if w.endswith("es") and w[:-2].endswith(("sh", "ch", "x")):
        return w[:-2]
    if w.endswith("s") and not w.endswith("ss"):
        return w[:-1]
    return w


def parse_instruction(i) -> Program:
    """Goal rule for a templated instruction (an Instruction or its text)."""
    text = i.text if isinstance(i, Instruction) else str(i)
    norm = " ".join(text.lower().split())
    for name, rx in _PATTERNS:
        m = rx.match(norm)
        if m:
            return goal_program(name, _category(m["obj"]), _category(m["loc"]))
    raise UnknownTemplate(f"no instruction template matches {text!r}")


# --- trajectory and memory ---------------------------------------------------------------

@dataclass
class Trajectory:
    """Alternating observations and actions, with the belief held after each observation."""

    items: list = field(default_factory=list)
    beliefs: list = field(default_factory=list)

    def observe(self, obs: ObservationRecord, belief: frozenset) -> None:
        if self.items and isinstance(self.items[-1], ObservationRecord):
            raise ValueError("two observations in a row")
        self.items.append(obs)
        self.beliefs.append(belief)

    def act(self, a: GroundAction) -> None:
        if not self.items or not isinstance(self.items[-1], ObservationRecord):
            raise ValueError("an action must follow an observation")
        self.items.append(a)

    @property
    def belief(self) -> frozenset:
        return self.beliefs[-1] if self.beliefs else frozenset()

    @property
    def actions(self) -> list:
        return [x for x in self.items if isinstance(x, GroundAction)]

    def copy(self) -> "Trajectory":
        return Trajectory(list(self.items), list(self.beliefs))


@dataclass
class WorkingMemory:
    entries: list = field(default_factory=list)  # (trajectory prefix, c)
    transitions: list = field(default_factory=list)

    def append(self, sigma: Trajectory, c: int, transition: Transition) -> None:
        self.entries.append((sigma.copy(), c))
        self.transitions.append(transition)

    def clear(self) -> None:
        self.entries.clear()
        self.transitions.clear()

    def __len__(self):
        return len(self.entries)

    def as_experiences(self, traj_id: str) -> ExperienceSet:
        xs = ExperienceSet(origin="M")
        if self.transitions:
            xs.add(traj_id, self.transitions)
        return xs


# --- configuration and results ---------------------------------------------------------

@dataclass
class AgentConfig:
    horizon: int = 12
    max_env_steps: int = 30
    refinement_budget: int = 5
    reformulation: ReformulationConfig = field(default_factory=ReformulationConfig)
    semantic_parser: str = "structured"  # or "llm"
    feedback: str = BINARY
    llm: object = None  # LlmEndpointConfig for the llm parser
    guidance_hook: Optional[Callable] = None  # (pre belief, action) -> Transition or None
    explore: bool = True
    relax: bool = True  # when no plan exists, try one with a constraint dropped

    def __post_init__(self):
        if min(self.horizon, self.max_env_steps, self.refinement_budget) < 0:
            raise ValueError("budgets must be non-negative")
        if self.feedback not in (BINARY, CAUSE, GUIDANCE):
            raise ValueError(f"unknown feedback mode {self.feedback!r}")
        if self.semantic_parser not in ("structured", "llm"):
            raise ValueError(f"unknown semantic parser {self.semantic_parser!r}")


@dataclass
class EpisodeResult:
    success: bool
    goal_conditions_met: float
    step_alignment: float
    steps_used: int
    refinements_triggered: int
    final_R: GeneralizedKnowledge
    executed: tuple = ()
    failures: int = 0
    stuck: bool = False

    def to_dict(self) -> dict:
        return {"success": self.success, "gc": self.goal_conditions_met,
                "step": self.step_alignment, "steps_used": self.steps_used,
                "refinements": self.refinements_triggered, "failures": self.failures,
                "stuck": self.stuck, "executed": [str(a) for a in self.executed]}


@dataclass(frozen=True)
class CheckedObservation:
    """The next observation after normalisation, with the detail the feedback mode allows."""

    structured: Interpretation
    text: str
    step: int
    instruction: str
    mismatches: tuple = ()
    guidance: Optional[Transition] = None


# --- helpers ------------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _planner(k: GeneralizedKnowledge, statics: frozenset, objects: frozenset) -> Planner:
    return Planner(k, statics, objects)


def _relevant_objects(goal: Program, belief: frozenset) -> frozenset:
    """Entities mentioned by the goal's type literals, plus held objects and all locations."""
    names = set()
    typed = {l.atom.predicate for c in goal.clauses for l in c.body
             if l.atom.arity == 1 and not l.naf}
    for a in belief:
        if (a.predicate in typed and a.arity == 1) or a.predicate == "location":
            names.add(a.args[0])
        elif a.predicate == "holding":
            names.add(a.args[0])
    return frozenset(names)


def planner_for(k: GeneralizedKnowledge, belief: frozenset, goal: Program) -> Planner:
    return _planner(k, statics_of(belief), _relevant_objects(goal, belief))


def semantic_parse(obs: ObservationRecord, cfg: AgentConfig) -> Interpretation:
    if cfg.semantic_parser == "llm":
        from .llm import llm_semantic_parse
        return llm_semantic_parse(obs.text, cfg.llm)
    return parse_observation(obs.text)


def expected_change(k: GeneralizedKnowledge, belief: frozenset, a: GroundAction,
                    planner: Optional[Planner] = None) -> tuple:
    """(adds, deletes) the rules predict for ``a`` from the believed state."""
    pl = planner or _planner(k, statics_of(belief), frozenset())
    pre = State(fluents_of(belief))
    post = pl.successor(pre, a)
    return post.fluents - pre.fluents, pre.fluents - post.fluents


def error_handler(sigma: Trajectory, a: GroundAction, o_next: ObservationRecord,
                  k: GeneralizedKnowledge, mode: str = BINARY, planner: Optional[Planner] = None,
                  guidance_hook: Optional[Callable] = None, parsed: Optional[Interpretation] = None):
    """Judge an executed action by its observed effects.

    Returns ``(c, checked)``: c is 1 when every predicted add is observed and
    every predicted delete is gone. When the rules predict nothing, the action
    counts as failed if the believed state did not change at all.
    """
    pre = sigma.belief
    parsed = parsed if parsed is not None else parse_observation(o_next.text)
    post = merge_observation(pre, parsed)
    adds, dels = expected_change(k, pre, a, planner)
    post_f = fluents_of(post)
    missing = sorted((x for x in adds if x not in post_f), key=str)
    lingering = sorted((x for x in dels if x in post_f), key=str)
    if adds or dels:
        c = int(not missing and not lingering)
    else:
        c = int(post_f != fluents_of(pre))
    mism = tuple(missing + lingering) if mode in (CAUSE, GUIDANCE) else ()
    guide = None
    if mode == GUIDANCE and not c and guidance_hook is not None:
        guide = guidance_hook(pre, a)
    text = "\n".join(sorted(str(x) for x in post))
    return c, CheckedObservation(Interpretation(post), text, o_next.step, o_next.instruction,
                                 mism, guide)


def step_alignment(executed, reference) -> float:
    """Longest common prefix of executed and reference actions over the reference length."""
    reference = list(reference or ())
    if not reference:
        return 1.0
    n = 0
    for x, y in zip(executed, reference):
        if str(x) != str(y):
            break
        n += 1
    return n / len(reference)


def relaxed_plan(k: GeneralizedKnowledge, belief: frozenset, goal: Program, horizon: int,
                 known_failures=frozenset()):
    """Shortest plan after dropping the fewest constraints (one, else all), or None.

    Plans whose first step already failed from the same believed state are
    skipped. Returns ``(plan, dropped clauses)``.
    """
    state = State(fluents_of(belief))
    cons = list(k.constraints.clauses)
    pl = _planner(k, statics_of(belief), _relevant_objects(goal, belief))
    options = [(frozenset((i,)), (c,)) for i, c in enumerate(cons)]
    if cons:
        options.append((frozenset(range(len(cons))), tuple(cons)))
    for allowed, dropped in options:
        p = pl.plan(state, goal, horizon, allowed)
        if p is not None and p.actions and (state, p.actions[0]) not in known_failures:
            return p, dropped
    return None, ()


def _relax(k, belief, goal, horizon, failed, committed):
    """Keep the constraints set aside by the previous relaxed plan while they still apply."""
    if committed and set(committed) <= set(k.constraints.clauses):
        allowed = frozenset(i for i, c in enumerate(k.constraints.clauses) if c in committed)
        state = State(fluents_of(belief))
        p = _planner(k, statics_of(belief), _relevant_objects(goal, belief)).plan(
            state, goal, horizon, allowed)
        if p is not None and p.actions and (state, p.actions[0]) not in failed:
            return p, committed
    p, dropped = relaxed_plan(k, belief, goal, horizon, failed)
    return p, (dropped if p is not None else ())


def _least_recent_location(sigma: Trajectory, belief: frozenset) -> Optional[GroundAction]:
    locs = sorted(a.args[0].name for a in belief if a.predicate == "location")
    here = {a.args[0].name for a in belief if a.predicate == "robot_at"}
    last = {l: -1 for l in locs}
    for i, b in enumerate(sigma.beliefs):
        for a in b:
            if a.predicate == "robot_at" and a.args[0].name in last:
                last[a.args[0].name] = i
    cands = [l for l in locs if l not in here]
    if not cands:
        return None
    best = min(cands, key=lambda l: (last[l], l))
    return GroundAction("go_to", (Constant(best),))


# --- the loop ---------------------------------------------------------------------------------

def run_episode(env: World, knowledge: GeneralizedKnowledge, t_set: Optional[ExperienceSet],
                cfg: Optional[AgentConfig] = None, trace: Optional[list] = None,
                episode_id: str = "episode"):
    """Plan-act-check loop with error-triggered refinement.

    Returns ``(EpisodeResult, experience set, knowledge)``; the experience set
    is extended in place with working memory at every refinement.
    """
    cfg = cfg or AgentConfig()
    t_set = t_set if t_set is not None else ExperienceSet()
    trace = trace if trace is not None else []
    k = knowledge
    memory = WorkingMemory()
    budget = cfg.refinement_budget
    refinements = failures = 0
    executed: list = []
    stuck = False
    reference = tuple(env.oracle_plan or ())

    obs = env.initial_observation
    belief = merge_observation(None, semantic_parse(obs, cfg))
    sigma = Trajectory()
    sigma.observe(obs, belief)
    trace.append({"event": "observation", "step": obs.step, "text": obs.text})
    no_plan_since = None  # belief at the last planning failure
    explored = 0
    failed: set = set()  # (believed state, action) pairs judged as failures
    committed: tuple = ()  # constraints set aside by the current relaxed plan

    while not env.done and env.steps < cfg.max_env_steps:
        goal = parse_instruction(obs.instruction)
        pl = planner_for(k, belief, goal)
        state = State(fluents_of(belief))
        plan = pl.plan(state, goal, cfg.horizon)
        trace.append({"event": "plan", "step": env.steps,
                      "plan": None if plan is None else [str(a) for a in plan]})
        if plan is not None:
            committed = ()
        elif cfg.relax:
            plan, committed = _relax(k, belief, goal, cfg.horizon, failed, committed)
            if plan is not None:
                trace.append({"event": "relaxed_plan", "step": env.steps,
                              "plan": [str(a) for a in plan],
                              "dropped": [str(c) for c in committed]})
        if plan is None:
            if no_plan_since == belief or not cfg.explore or explored >= len(env.locations):
                stuck = True
                trace.append({"event": "stuck", "step": env.steps})
                log.info("%s: no plan on an unchanged belief", episode_id)
                break
            no_plan_since = belief
            a = _least_recent_location(sigma, belief)
            if a is None:
                stuck = True
                break
            explored += 1
        elif not plan.actions:
            break  # goal believed satisfied but the world disagrees; nothing left to do
        else:
            a = plan.actions[0]
            no_plan_since, explored = None, 0

        forbidden = not pl.applicable(state, a)
        sigma.act(a)
        try:
            obs_next = env.step(a)
        except EpisodeOver:
            break
        executed.append(a)
        parsed = semantic_parse(obs_next, cfg)
        c, checked = error_handler(sigma, a, obs_next, k, cfg.feedback, pl,
                                   cfg.guidance_hook, parsed)
        trace.append({"event": "action", "step": env.steps, "action": str(a)})
        trace.append({"event": "affordance", "step": env.steps, "action": str(a), "c": c,
                      "mismatches": [str(x) for x in checked.mismatches]})
        post = checked.structured.atoms
        tr = Transition(Interpretation(fluents_of(belief) | statics_of(belief)), a.atom,
                        Interpretation(post), c)
        belief = frozenset(post)
        obs = obs_next
        sigma.observe(obs, belief)
        memory.append(sigma, c, tr)
        trace.append({"event": "observation", "step": obs.step, "text": obs.text})

        if c and not forbidden:
            continue
        if c:
            trace.append({"event": "contradiction", "step": env.steps, "action": str(a)})
        else:
            failures += 1
            failed.add((state, a))
        if budget <= 0:
            trace.append({"event": "budget_exhausted", "step": env.steps})
            break
        mem = memory.as_experiences(f"{episode_id}-m{refinements}")
        if checked.guidance is not None:
            mem.add(f"{episode_id}-g{refinements}", [checked.guidance])
        k = reformulate(t_set, seed_h=k, cfg=cfg.reformulation, memory=mem)
        t_set.extend(mem)
        memory.clear()
        budget -= 1
        refinements += 1
        committed = ()
        sigma = Trajectory()
        sigma.observe(obs, belief)
        trace.append({"event": "refinement", "step": env.steps, "index": refinements,
                      "experiences": len(t_set), "rules": k.to_lp()})

    result = EpisodeResult(
        success=bool(env.success),
        goal_conditions_met=env.goal_condition_rate(),
        step_alignment=step_alignment(executed, reference),
        steps_used=env.steps,
        refinements_triggered=refinements,
        final_R=k,
        executed=tuple(executed),
        failures=failures,
        stuck=stuck,
    )
    trace.append({"event": "result", **result.to_dict()})
    return result, t_set, k


def write_trace(events: list, path) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev, sort_keys=True) + "\n")


def read_trace(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
