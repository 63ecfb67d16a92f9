"""``nesyc`` command line.

Exit codes: 0 on success, 1 when a run fails at runtime, 2 for usage or
configuration errors (bad flags, missing files, empty task lists).
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import __version__
from .agent import AgentConfig, run_episode, write_trace
from .domain import HOUSEHOLD, GeneralizedKnowledge, knowledge_f1
from .envsim import POLICIES, DynamicsLevel, World, WorldConfig, gen_dataset, load_dataset, \
    oracle_rules, records_to_experiences, save_dataset, statics_of, fluents_of, merge_observation
from .errors import NesycError
from .harness import ALL_TEMPLATES, DEFAULT_CURRICULUM, BenchConfig, ContinualConfig, Phase, \
    bench, continual, summary_row
from .interpretation import Example, Interpretation
from .lptext import parse, print_program
from .metrics import summarize, write_csv, write_json
from .planner import Planner, State, load_problem, plan as solve
from .reformulation import ExperienceSet, FixedGenerator, ReformulationConfig, interpret_loop, \
    reformulate
from .scoring import ScoringParams

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("nesyc")


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 2."""


# --- shared helpers ------------------------------------------------------------------------

def _existing(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _load_table(path) -> dict:
    p = _existing(path, "config file")
    text = p.read_text()
    try:
        return json.loads(text) if p.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _world(args) -> WorldConfig:
    """World config from --world, overridden by --dynamics / --p / --world-seed."""
    data = dict(_load_table(args.world).get("world", _load_table(args.world))) if args.world else {}
    if getattr(args, "dynamics", None):
        data["dynamics"] = args.dynamics
        data.pop("p", None)
    if getattr(args, "p", None) is not None:
        data["p"] = args.p
    if getattr(args, "world_seed", None) is not None:
        data["rng_seed"] = args.world_seed
    try:
        return WorldConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad world config: {exc}") from exc


def _scoring(args) -> ReformulationConfig:
    try:
        return ReformulationConfig(batch_size=args.batch_size, itermax=args.itermax,
                                   scoring=ScoringParams(args.alpha, args.lam),
                                   rng_seed=args.rng_seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _read_rules(path) -> GeneralizedKnowledge:
    return GeneralizedKnowledge.from_program(parse(_existing(path, "rules file").read_text()),
                                             HOUSEHOLD)


def _run_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _snapshot(out: Path, command: str, args, resolved: dict, seeds) -> None:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    write_json({"command": command, "flags": flags, "resolved": resolved,
                "version": __version__, "python": platform.python_version()},
               out / "config.json")
    write_json({"seeds": list(seeds)}, out / "seeds.json")


def _add_scoring_flags(p) -> None:
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=6)
    p.add_argument("--itermax", type=int, default=3)
    p.add_argument("--rng-seed", type=int, default=0)


def _add_world_flags(p) -> None:
    p.add_argument("--world", help="world config (.toml or .json)")
    p.add_argument("--dynamics", choices=[d.value for d in DynamicsLevel])
    p.add_argument("--p", type=float, help="perturbation rate override")
    p.add_argument("--world-seed", type=int)


# --- subcommands -----------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    world = _world(args)
    records = gen_dataset(world, args.episodes, args.policy, seed=args.seed)
    save_dataset(records, args.out)
    n = sum(len(r["trajectory"]) for r in records)
    print(f"wrote {len(records)} episodes ({n} steps) to {args.out}")
    return 0


def _lfi_task(task: dict, cfg: ReformulationConfig):
    """Select among named candidate hypotheses for an explicit learning-from-interpretations task."""
    bk = parse(task.get("background", ""))

    def interp(facts) -> Interpretation:
        text = facts if isinstance(facts, str) else " ".join(f if f.endswith(".") else f + "."
                                                            for f in facts)
        return Interpretation(frozenset(c.head for c in parse(text).clauses))

    examples = [Example(interp(v), True, "T", k) for k, v in task["positives"].items()]
    examples += [Example(interp(v), False, "T", k) for k, v in task["negatives"].items()]
    named = {name: parse(text) for name, text in task["candidates"].items()}
    trace = interpret_loop(examples, None, cfg, FixedGenerator(named.values(), bk), bk)
    chosen = next(n for n, h in named.items() if h == trace.accepted)
    report = {"selected": chosen, "hi": trace.accepted_hi.value, "tpr": trace.accepted_hi.tpr,
              "fpr": trace.accepted_hi.fpr, "passes": trace.passes}
    return print_program(trace.accepted), report


def cmd_learn(args) -> int:
    data = json.loads(_existing(args.data, "dataset").read_text())
    cfg = _scoring(args)
    if isinstance(data, dict) and "candidates" in data:
        text, report = _lfi_task(data, cfg)
    else:
        try:
            records = load_dataset(args.data)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if args.generator == "llm":
            from .llm import ChatClient, LlmEndpointConfig, LlmGenerator
            llm_cfg = LlmEndpointConfig.from_file(_existing(args.llm_config, "llm config")) \
                if args.llm_config else LlmEndpointConfig()
            if args.fixtures:
                llm_cfg = replace(llm_cfg, fixtures_dir=str(args.fixtures))
            cfg = replace(cfg, generator=LlmGenerator(llm_cfg, HOUSEHOLD, ChatClient(llm_cfg)))
        seed_h = _read_rules(args.seed_rules) if args.seed_rules else None
        traces: list = []
        k = reformulate(records_to_experiences(records), seed_h, cfg, trace_out=traces)
        tr = traces[0]
        text = k.to_lp()
        report = {"hi": tr.accepted_hi.value if tr.accepted_hi else None,
                  "first_pass_best_hi": tr.first_step_best if tr.passes else None,
                  "passes": tr.passes, "rules": len(k.clauses),
                  "constraints": len(k.constraints.clauses),
                  "f1_vs_oracle": knowledge_f1(k.clauses, oracle_rules().clauses)}
    Path(args.out).write_text(text)
    if args.report:
        write_json(report, args.report)
    print(json.dumps({k: v for k, v in report.items() if k != "passes"}, default=str))
    return 0


def cmd_plan(args) -> int:
    if args.problem:
        problem = load_problem(_existing(args.problem, "problem file").read_text(), args.horizon)
        result = solve(replace(problem, horizon=args.horizon))
    else:
        if not args.rules:
            raise UsageError("plan needs --problem or --rules")
        k = _read_rules(args.rules)
        env, obs, instr = World.reset(_world(args), task_seed=args.task_seed)
        from .agent import parse_instruction
        belief = merge_observation(None, obs.structured)
        planner = Planner(k, statics_of(belief))
        result = planner.plan(State(fluents_of(belief)), parse_instruction(instr), args.horizon)
        print(f"instruction: {instr.text}")
    if result is None:
        print(f"no plan within horizon {args.horizon}")
        return 1
    print(json.dumps([str(a) for a in result.actions]))
    return 0


def cmd_run(args) -> int:
    if args.refinements < 0:
        raise UsageError("--refinements must be >= 0")
    world = _world(args)
    rcfg = _scoring(args)
    out = _run_dir(args.out)
    if args.rules:
        k, t_set = _read_rules(args.rules), ExperienceSet()
        if args.data:
            t_set = records_to_experiences(load_dataset(_existing(args.data, "dataset")))
    else:
        if args.data:
            recs = load_dataset(_existing(args.data, "dataset"))
        else:
            static = replace(world, dynamics=DynamicsLevel.STATIC, p=0.0)
            recs = gen_dataset(static, args.seed_episodes, "random-failures", seed=args.data_seed)
        t_set = records_to_experiences(recs, prefix="seed-")
        k = reformulate(t_set, None, rcfg)
    acfg = AgentConfig(horizon=args.horizon, max_env_steps=world.max_steps,
                       refinement_budget=args.refinements, reformulation=rcfg)
    env, _, instr = World.reset(world, task_seed=args.task_seed)
    trace: list = [{"event": "task", "task": args.task_seed, "instruction": instr.text}]
    res, _, k = run_episode(env, k, t_set, acfg, trace, episode_id=f"t{args.task_seed}")
    _snapshot(out, "run", args, {"world": world.to_dict()}, [args.task_seed])
    write_trace(trace + [{"event": "world", **e} for e in env.trace], out / "traces.jsonl")
    s = summarize({world.rng_seed: [res.to_dict()]})
    write_csv([summary_row(s, "run")], out / "metrics.csv")
    write_json({"episode": res.to_dict(), "summary": s.to_dict()}, out / "metrics.json")
    (out / "rules.lp").write_text(k.to_lp())
    print(f"{instr.text}: success={res.success} gc={res.goal_conditions_met:.2f} "
          f"steps={res.steps_used} refinements={res.refinements_triggered}")
    return 0


def _seeds(text: str) -> tuple:
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise UsageError(f"bad --seeds value {text!r}") from exc
    if not seeds:
        raise UsageError("--seeds must list at least one seed")
    return seeds


def cmd_bench(args) -> int:
    if args.tasks < 1:
        raise UsageError("bench needs at least one task (--tasks >= 1)")
    cfg = BenchConfig(world=_world(args), tasks=args.tasks, seeds=_seeds(args.seeds),
                      refinements=args.refinements, seed_episodes=args.seed_episodes,
                      data_seed=args.data_seed, reformulation=_scoring(args),
                      horizon=args.horizon, workers=args.workers)
    out = _run_dir(args.out)
    t0 = time.time()
    summary, outs = bench(cfg)
    _snapshot(out, "bench", args, {"world": cfg.world.to_dict(), "tasks": cfg.tasks,
                                   "refinements": cfg.refinements,
                                   "seed_episodes": cfg.seed_episodes,
                                   "data_seed": cfg.data_seed}, cfg.seeds)
    write_trace([ev for o in outs for ev in o["events"]], out / "traces.jsonl")
    label = f"{cfg.world.dynamics.value}"
    write_csv([summary_row(summary, label)], out / "metrics.csv")
    write_json({"summary": summary.to_dict(),
                "table": {m: summary.cell(m) for m in ("sr", "gc", "step")},
                "episodes": [e for o in outs for e in o["episodes"]]}, out / "metrics.json")
    for o in outs:
        (out / f"rules_seed{o['seed']}.lp").write_text(o["rules"])
    (out / "rules.lp").write_text(outs[-1]["rules"])
    print(f"{label}: SR {summary.cell('sr')}  GC {summary.cell('gc')}  "
          f"Step {summary.cell('step')}  ({summary.n_episodes} episodes, {time.time() - t0:.0f}s)")
    return 0


def _curriculum(n: int) -> tuple:
    if n < 1:
        raise UsageError("--phases must be >= 1")
    base = list(DEFAULT_CURRICULUM[:n])
    base += [Phase(ALL_TEMPLATES, 0)] * (n - len(base))
    return tuple(base)


def cmd_continual(args) -> int:
    world = _world(args) if (args.world or args.dynamics or args.world_seed is not None) \
        else WorldConfig(rng_seed=1)
    cfg = ContinualConfig(world=world, phases=_curriculum(args.phases),
                          refinements=args.refinements, reformulation=_scoring(args),
                          horizon=args.horizon)
    out = _run_dir(args.out)
    rows, events, k = continual(cfg)
    _snapshot(out, "continual", args, {"world": world.to_dict(),
                                       "phases": [vars(p) for p in cfg.phases]},
              [world.rng_seed])
    write_trace(events, out / "traces.jsonl")
    write_csv(rows, out / "metrics.csv")
    write_json({"phases": rows, "delta_per_phase": [r["delta"] for r in rows]},
               out / "metrics.json")
    (out / "rules.lp").write_text(k.to_lp())
    print(f"{'phase':>5} {'SR':>6} {'GC':>6} {'delta':>7} {'F1':>6}")
    for r in rows:
        print(f"{r['phase']:>5} {r['sr']:>6.1f} {r['gc']:>6.1f} {r['delta']:>6.1f}% {r['f1']:>6.1f}")
    return 0


# --- parser ----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nesyc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="record scripted episodes as a JSON dataset")
    _add_world_flags(p)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=sorted(POLICIES), default="random-failures")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("learn", help="learn rules from a dataset or an explicit LFI task")
    p.add_argument("--data", required=True)
    p.add_argument("--seed-rules")
    p.add_argument("--out", required=True, help="rules file to write (.lp)")
    p.add_argument("--report", help="JSON report path")
    p.add_argument("--generator", choices=("enum", "llm"), default="enum")
    p.add_argument("--llm-config")
    p.add_argument("--fixtures", help="directory of recorded chat replies")
    _add_scoring_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("plan", help="plan for a problem file or a sampled world task")
    p.add_argument("--problem")
    p.add_argument("--rules")
    _add_world_flags(p)
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=12)
    p.set_defaults(func=cmd_plan)

    common = argparse.ArgumentParser(add_help=False)
    _add_world_flags(common)
    _add_scoring_flags(common)
    common.add_argument("--refinements", type=int, default=5)
    common.add_argument("--horizon", type=int, default=12)
    common.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("run", parents=[common], help="one episode")
    p.add_argument("--task-seed", type=int, default=0)
    p.add_argument("--rules")
    p.add_argument("--data")
    p.add_argument("--seed-episodes", type=int, default=10)
    p.add_argument("--data-seed", type=int, default=99)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="seeded task streams with metrics")
    p.add_argument("--tasks", type=int, default=50)
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--seed-episodes", type=int, default=10)
    p.add_argument("--data-seed", type=int, default=99)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("continual", parents=[common], help="scripted multi-phase curriculum")
    p.add_argument("--phases", type=int, default=8)
    p.set_defaults(func=cmd_continual, refinements=10)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nesyc: error: {exc}", file=sys.stderr)
        return 2
    except (NesycError, RuntimeError, OSError) as exc:
        print(f"nesyc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
