"""Experiment protocols shared by the command line and the acceptance suite.

``bench`` learns seed rules from a few recorded episodes, then runs a stream
of tasks per seed with refinement carried across tasks. ``continual`` walks
a scripted curriculum in which phases introduce task types with a handful
of demonstrations and later phases only consolidate.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .agent import AgentConfig, run_episode
from .domain import GeneralizedKnowledge, knowledge_f1, rule_delta
from .envsim import TEMPLATES, DynamicsLevel, World, WorldConfig, gen_dataset, oracle_rules, \
    records_to_experiences
from .metrics import MetricsSummary, seed_rates, summarize
from .reformulation import ExperienceSet, ReformulationConfig, reformulate

log = logging.getLogger(__name__)

ALL_TEMPLATES = tuple(sorted(TEMPLATES))


@dataclass
class BenchConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    tasks: int = 50
    seeds: tuple = (1, 2, 3)
    refinements: int = 5
    seed_episodes: int = 10
    seed_policy: str = "random-failures"
    data_seed: int = 99
    reformulation: ReformulationConfig = field(default_factory=ReformulationConfig)
    horizon: int = 12
    workers: int = 1

    def __post_init__(self):
        if self.tasks < 1:
            raise ValueError("bench needs at least one task")
        if not self.seeds:
            raise ValueError("bench needs at least one seed")
        if self.seed_episodes < 0 or self.refinements < 0:
            raise ValueError("counts must be non-negative")


def seed_knowledge(world: WorldConfig, episodes: int, data_seed: int,
                   policy: str = "random-failures", rcfg: Optional[ReformulationConfig] = None):
    """Experiences recorded in the static version of ``world`` and the rules learned from them."""
    if episodes == 0:
        return ExperienceSet(), None
    static = replace(world, dynamics=DynamicsLevel.STATIC, p=0.0)
    recs = gen_dataset(static, episodes, policy, seed=data_seed)
    xs = records_to_experiences(recs, prefix="seed-")
    return xs, reformulate(xs, None, rcfg or ReformulationConfig())


def run_seed(cfg: BenchConfig, seed: int) -> dict:
    """One seed of a bench run: episode records, trace events and final rules."""
    world = replace(cfg.world, rng_seed=seed)
    rcfg = replace(cfg.reformulation, generator=None)
    t_set, k = seed_knowledge(world, cfg.seed_episodes, cfg.data_seed, cfg.seed_policy, rcfg)
    if k is None:
        k = GeneralizedKnowledge()
    acfg = AgentConfig(horizon=cfg.horizon, max_env_steps=world.max_steps,
                       refinement_budget=cfg.refinements, reformulation=rcfg)
    episodes, events = [], []
    for i in range(cfg.tasks):
        env, _, instr = World.reset(world, task_seed=1000 + i)
        trace: list = [{"event": "task", "seed": seed, "task": i, "instruction": instr.text}]
        res, t_set, k = run_episode(env, k, t_set, acfg, trace, episode_id=f"s{seed}t{i}")
        for ev in trace:
            ev.setdefault("seed", seed)
            ev.setdefault("task", i)
        events.extend(trace)
        events.extend({"event": "world", "seed": seed, "task": i, **e} for e in env.trace)
        episodes.append({"seed": seed, "task": i, "instruction": instr.text, **res.to_dict()})
    return {"seed": seed, "episodes": episodes, "events": events, "rules": k.to_lp(),
            "f1": knowledge_f1(k.clauses, oracle_rules().clauses)}


def bench(cfg: BenchConfig) -> tuple:
    """(MetricsSummary, per-seed outputs ordered by seed)."""
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        outs = [run_seed(cfg, s) for s in cfg.seeds]
    outs.sort(key=lambda o: o["seed"])
    f1 = sum(o["f1"] for o in outs) / len(outs)
    summary = summarize({o["seed"]: o["episodes"] for o in outs}, f1_vs_oracle=100.0 * f1)
    return summary, outs


# --- continual learning ---------------------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    templates: tuple
    demos: int
    tasks: int = 3


DEFAULT_CURRICULUM = (
    Phase(("pick_place",), 15),
    Phase(("heat_place",), 6),
    Phase(("cool_place",), 6),
    Phase(("clean_place",), 6),
    Phase(ALL_TEMPLATES, 0),
    Phase(ALL_TEMPLATES, 0),
    Phase(ALL_TEMPLATES, 0),
    Phase(ALL_TEMPLATES, 0),
)


@dataclass
class ContinualConfig:
    world: WorldConfig = field(default_factory=lambda: WorldConfig(rng_seed=1))
    phases: Sequence[Phase] = DEFAULT_CURRICULUM
    refinements: int = 10
    reformulation: ReformulationConfig = field(default_factory=ReformulationConfig)
    horizon: int = 12

    def __post_init__(self):
        if not self.phases:
            raise ValueError("a continual scenario needs at least one phase")


def continual(cfg: ContinualConfig) -> tuple:
    """Run the curriculum; returns (per-phase rows, trace events, final rules)."""
    rcfg = replace(cfg.reformulation, generator=None)
    acfg = AgentConfig(horizon=cfg.horizon, max_env_steps=cfg.world.max_steps,
                       refinement_budget=cfg.refinements, reformulation=rcfg)
    oracle = oracle_rules().clauses
    t_set, k = ExperienceSet(), GeneralizedKnowledge()
    prev: list = []
    rows, events = [], []
    for i, ph in enumerate(cfg.phases, 1):
        wc = replace(cfg.world, templates=ph.templates)
        if ph.demos:
            recs = gen_dataset(replace(wc, dynamics=DynamicsLevel.STATIC, p=0.0), ph.demos,
                               "random-failures", seed=500 + i)
            t_set.extend(records_to_experiences(recs, prefix=f"p{i}-"))
            k = reformulate(t_set, k if k.constraints.clauses else None, rcfg)
        eps = []
        for j in range(ph.tasks):
            env, _, instr = World.reset(wc, task_seed=10_000 * i + j)
            trace: list = [{"event": "task", "phase": i, "task": j, "instruction": instr.text}]
            res, t_set, k = run_episode(env, k, t_set, acfg, trace, episode_id=f"p{i}t{j}")
            events.extend(dict(ev, phase=i) for ev in trace)
            eps.append(res.to_dict())
        clauses = k.clauses
        r = seed_rates(eps) if eps else {"sr": float("nan"), "gc": float("nan")}
        rows.append({"phase": i, "templates": "+".join(ph.templates), "sr": r["sr"],
                     "gc": r["gc"], "delta": rule_delta(prev, clauses),
                     "f1": 100.0 * knowledge_f1(clauses, oracle), "rules": len(clauses),
                     "experiences": len(t_set)})
        log.info("phase %d: %s", i, rows[-1])
        prev = clauses
    return rows, events, k


def summary_row(s: MetricsSummary, label: str = "") -> dict:
    return {"label": label, "sr": round(s.sr, 2), "sr_std": round(s.sr_std, 2),
            "gc": round(s.gc, 2), "gc_std": round(s.gc_std, 2), "step": round(s.step, 2),
            "step_std": round(s.step_std, 2), "n": s.n_episodes,
            "f1_vs_oracle": round(s.f1_vs_oracle, 2)}
