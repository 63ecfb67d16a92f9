"""A small seeded household world with hidden ground-truth action rules.

The agent sees one location at a time (plus what it holds); a reset gives a
full look-around. Observations come as structured atoms and as templated text
that parses back exactly. Dynamics levels add random perturbations after each
action: relocations (low) and, at the high level, attribute mutations,
goal-relevant state changes and instruction changes.
"""
from __future__ import annotations

import enum
import json
import re
from functools import lru_cache
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .domain import HOUSEHOLD, GeneralizedKnowledge, inertia_rules
from .errors import EpisodeOver, UnsatisfiableTask
from .interpretation import Interpretation
from .logic import Atom, Constant, Program
from .lptext import parse, parse_atom
from .planner import GroundAction, Planner, State, goal_satisfied
from .reformulation import ExperienceSet, Transition

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


class DynamicsLevel(str, enum.Enum):
    STATIC = "static"
    LOW = "low"
    HIGH = "high"


DEFAULT_RATE = {DynamicsLevel.STATIC: 0.0, DynamicsLevel.LOW: 0.1, DynamicsLevel.HIGH: 0.2}

OBJECT_ATTRS = ("heatable", "coolable", "cleanable")
LOCATION_ATTRS = ("openable", "is_heater", "is_cooler", "is_cleaner")
_ATTR_WORD = {"openable": "openable", "is_heater": "heater", "is_cooler": "cooler",
              "is_cleaner": "cleaner", "heatable": "heatable", "coolable": "coolable",
              "cleanable": "cleanable"}
_WORD_ATTR = {v: k for k, v in _ATTR_WORD.items()}

# category -> attributes
CATALOG = {
    "apple": ("heatable", "coolable", "cleanable"),
    "potato": ("heatable", "coolable", "cleanable"),
    "egg": ("heatable", "coolable"),
    "mug": ("heatable", "coolable", "cleanable"),
    "cup": ("coolable", "cleanable"),
    "plate": ("heatable", "cleanable"),
    "lettuce": ("coolable", "cleanable"),
    "tomato": ("heatable", "coolable", "cleanable"),
    "bread": ("heatable", "coolable"),
    "bowl": ("heatable", "coolable", "cleanable"),
    "knife": ("cleanable",),
    "spoon": ("cleanable",),
}
LOCATIONS = {
    "fridge": ("openable", "is_cooler"),
    "microwave": ("openable", "is_heater"),
    "sinkbasin": ("is_cleaner",),
}


@dataclass(frozen=True)
class Entity:
    name: str
    category: str
    attributes: frozenset


@dataclass
class WorldConfig:
    rng_seed: int = 0
    n_objects: int = 10
    objects: Optional[dict] = None  # category -> attributes; default CATALOG
    locations: Optional[dict] = None  # name -> attributes; default LOCATIONS
    placements: Optional[dict] = None  # object name -> location name
    dynamics: DynamicsLevel = DynamicsLevel.STATIC
    p: Optional[float] = None
    max_steps: int = 30
    templates: Optional[tuple] = None  # instruction templates to sample; default all

    def __post_init__(self):
        self.dynamics = DynamicsLevel(self.dynamics)
        if self.templates is not None:
            self.templates = tuple(self.templates)
            bad = set(self.templates) - set(TEMPLATES)
            if bad or not self.templates:
                raise ValueError(f"unknown instruction templates: {sorted(bad)}")
        if self.p is None:
            self.p = DEFAULT_RATE[self.dynamics]
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"perturbation rate must lie in [0, 1], got {self.p}")
        if self.dynamics is DynamicsLevel.STATIC and self.p != 0:
            raise ValueError("static dynamics require p = 0")
        if not 1 <= self.n_objects <= len(self.objects or CATALOG):
            raise ValueError(f"n_objects out of range: {self.n_objects}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        d = dict(d.get("world", d))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown world config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "WorldConfig":
        path = Path(path)
        text = path.read_text()
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"rng_seed": self.rng_seed, "n_objects": self.n_objects, "objects": self.objects,
                "locations": self.locations, "placements": self.placements,
                "dynamics": self.dynamics.value, "p": self.p, "max_steps": self.max_steps,
                "templates": list(self.templates) if self.templates else None}


@dataclass(frozen=True)
class ObservationRecord:
    structured: Interpretation
    text: str
    step: int
    instruction: str = ""


@dataclass(frozen=True)
class Instruction:
    text: str
    template: str
    slots: dict
    goal: Program

    def __hash__(self):
        return hash((self.text, self.template))


# --- rules -------------------------------------------------------------------

_ORACLE = """
:- action(go_to(L), T), robot_at(L, T).
:- action(pick_up(O, L), T), not at(O, L, T).
:- action(pick_up(O, L), T), not robot_at(L, T).
:- action(pick_up(O, L), T), openable(L), not is_open(L, T).
:- action(pick_up(O, L), T), holding(O2, T).
:- action(put_down(O, L), T), not holding(O, T).
:- action(put_down(O, L), T), not robot_at(L, T).
:- action(put_down(O, L), T), openable(L), not is_open(L, T).
:- action(open(L), T), not openable(L).
:- action(open(L), T), not robot_at(L, T).
:- action(open(L), T), is_open(L, T).
:- action(close(L), T), not robot_at(L, T).
:- action(close(L), T), not is_open(L, T).
:- action(heat(O, L), T), not holding(O, T).
:- action(heat(O, L), T), not robot_at(L, T).
:- action(heat(O, L), T), not is_heater(L).
:- action(heat(O, L), T), not heatable(O).
:- action(cool(O, L), T), not holding(O, T).
:- action(cool(O, L), T), not robot_at(L, T).
:- action(cool(O, L), T), not is_cooler(L).
:- action(cool(O, L), T), not coolable(O).
:- action(clean(O, L), T), not holding(O, T).
:- action(clean(O, L), T), not robot_at(L, T).
:- action(clean(O, L), T), not is_cleaner(L).
:- action(clean(O, L), T), not cleanable(O).
robot_at(L, T) :- action(go_to(L), T).
del_robot_at(P1, T) :- action(go_to(L), T), robot_at(P1, T-1).
holding(O, T) :- action(pick_up(O, L), T).
del_at(O, L, T) :- action(pick_up(O, L), T).
at(O, L, T) :- action(put_down(O, L), T).
del_holding(O, T) :- action(put_down(O, L), T).
is_open(L, T) :- action(open(L), T).
del_is_open(L, T) :- action(close(L), T).
is_hot(O, T) :- action(heat(O, L), T).
del_is_cold(O, T) :- action(heat(O, L), T).
is_cold(O, T) :- action(cool(O, L), T).
del_is_hot(O, T) :- action(cool(O, L), T).
is_clean(O, T) :- action(clean(O, L), T).
"""


def oracle_rules(cfg: Optional[WorldConfig] = None) -> GeneralizedKnowledge:
    """The simulator's own transition rules as a rule program."""
    return _oracle()


@lru_cache(maxsize=64)
def oracle_planner(statics: frozenset, objects: Optional[frozenset] = None) -> Planner:
    """Planner over the true rules; cached because statics rarely change."""
    return Planner(oracle_rules(), statics, objects)


@lru_cache(maxsize=1)
def _oracle() -> GeneralizedKnowledge:
    prog = parse(_ORACLE)
    k = GeneralizedKnowledge.from_program(prog, HOUSEHOLD)
    return replace(k, inertia=inertia_rules(HOUSEHOLD.fluents))


# --- instructions -----------------------------------------------------------------

TEMPLATES = {
    "pick_place": ("put {article} {obj} in the {loc}", None),
    "heat_place": ("heat {article} {obj} and put it in the {loc}", "heatable"),
    "cool_place": ("cool {article} {obj} and put it in the {loc}", "coolable"),
    "clean_place": ("clean {article} {obj} and put it in the {loc}", "cleanable"),
}
_STATE_OF = {"heat_place": "is_hot", "cool_place": "is_cold", "clean_place": "is_clean"}


def goal_program(template: str, obj_cat: str, loc_cat: str) -> Program:
    body = [f"is_{obj_cat}(O)", f"is_{loc_cat}(L)", "at(O, L, T)"]
    if template in _STATE_OF:
        body.append(f"{_STATE_OF[template]}(O, T)")
    return parse(f"goal(T) :- {', '.join(body)}.")


def make_instruction(template: str, obj_cat: str, loc_cat: str) -> Instruction:
    text_t, _ = TEMPLATES[template]
    article = "an" if obj_cat[0] in "aeiou" else "a"
    text = text_t.format(article=article, obj=obj_cat, loc=loc_cat)
    return Instruction(text, template, {"obj": obj_cat, "loc": loc_cat},
                       goal_program(template, obj_cat, loc_cat))


# --- observation text ---------------------------------------------------------------

def _names(xs) -> str:
    xs = sorted(xs)
    return ", ".join(xs) if xs else "nothing"


def render_observation(atoms: Iterable[Atom], look: Iterable[str], here: Optional[str]) -> str:
    """Template text for the given visible atoms; ``look`` lists the described locations."""
    atoms = set(atoms)
    by = {}
    for a in atoms:
        by.setdefault(a.predicate, []).append(tuple(c.name for c in a.args))
    lines = []
    if here:
        lines.append(f"You are at the {here}.")
    held = [x[0] for x in by.get("holding", [])]
    lines.append(f"You are holding {_names(held)}.")
    open_ = {x[0] for x in by.get("is_open", [])}
    cats = {x[0]: p[3:] for p, xs in by.items() if p.startswith("is_") and p not in
            HOUSEHOLD.fluents and p not in LOCATION_ATTRS for x in xs}
    attrs: dict = {}
    for p in OBJECT_ATTRS + LOCATION_ATTRS:
        for x in by.get(p, []):
            attrs.setdefault(x[0], []).append(_ATTR_WORD[p])
    for loc in sorted(look):
        desc = ", ".join([cats.get(loc, loc)] + sorted(attrs.get(loc, [])))
        lines.append(f"Location {loc}: {desc}.")
        if "openable" in attrs.get(loc, []):
            lines.append(f"The {loc} is {'open' if loc in open_ else 'closed'}.")
        inside = [o for o, l in by.get("at", []) if l == loc]
        lines.append(f"On the {loc} you see {_names(inside)}.")
    visible = sorted({o for o, _ in by.get("at", [])} | set(held))
    for o in visible:
        desc = ", ".join([cats.get(o, o)] + sorted(attrs.get(o, [])))
        lines.append(f"Object {o}: {desc}.")
        states = [w for p, w in (("is_hot", "hot"), ("is_cold", "cold"), ("is_clean", "clean"))
                  if (o,) in by.get(p, [])]
        if states:
            lines.append(f"The {o} is {' and '.join(states)}.")
    return " ".join(lines)


_SENT = re.compile(r"[^.]+\.")


def _c(x: str) -> Constant:
    return Constant(x)


def parse_observation(text: str) -> Interpretation:
    """Exact inverse of render_observation."""
    atoms = set()
    for raw in _SENT.findall(text):
        s = raw.strip().rstrip(".")
        if m := re.fullmatch(r"You are at the (\w+)", s):
            atoms.add(Atom("robot_at", (_c(m[1]),)))
        elif m := re.fullmatch(r"You are holding (.+)", s):
            for o in _split(m[1]):
                atoms.add(Atom("holding", (_c(o),)))
        elif m := re.fullmatch(r"(Location|Object) (\w+): (.+)", s):
            kind, name, rest = m[1], m[2], [w.strip() for w in m[3].split(",")]
            atoms.add(Atom("location" if kind == "Location" else "object", (_c(name),)))
            atoms.add(Atom(f"is_{rest[0]}", (_c(name),)))
            for w in rest[1:]:
                atoms.add(Atom(_WORD_ATTR[w], (_c(name),)))
        elif m := re.fullmatch(r"The (\w+) is (open|closed)", s):
            if m[2] == "open":
                atoms.add(Atom("is_open", (_c(m[1]),)))
        elif m := re.fullmatch(r"On the (\w+) you see (.+)", s):
            for o in _split(m[2]):
                atoms.add(Atom("at", (_c(o), _c(m[1]))))
        elif m := re.fullmatch(r"The (\w+) is ((?:hot|cold|clean)(?: and (?:hot|cold|clean))*)", s):
            for w in m[2].split(" and "):
                atoms.add(Atom(f"is_{w}", (_c(m[1]),)))
        elif s:
            raise ValueError(f"unrecognised observation sentence: {raw.strip()!r}")
    return Interpretation(frozenset(atoms))


def _split(s: str) -> list:
    return [] if s == "nothing" else [x.strip() for x in s.split(",")]


# --- belief tracking (deterministic semantic parser) -----------------------------------

def visible_entities(obs: Interpretation) -> set:
    out = set()
    for a in obs.atoms:
        if a.predicate in ("at", "holding", "robot_at", "object", "location"):
            out.add(a.args[0])
        if a.predicate == "at":
            out.add(a.args[1])
    return out


def merge_observation(belief: Optional[Iterable[Atom]], obs: Interpretation) -> frozenset:
    """Update a belief with a partial observation of the robot's surroundings.

    Facts about every entity mentioned in the observation are replaced; the
    robot's position and grip are always replaced; the rest is kept.
    """
    if belief is None:
        return frozenset(obs.atoms)
    seen = visible_entities(obs)
    here = {a.args[0] for a in obs.atoms if a.predicate == "robot_at"}
    keep = set()
    for a in belief:
        if a.predicate in ("robot_at", "holding"):
            continue
        if a.predicate == "at" and (a.args[0] in seen or a.args[1] in here):
            continue
        if a.args and a.args[0] in seen:
            continue
        keep.add(a)
    return frozenset(keep | obs.atoms)


def fluents_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(a for a in atoms if HOUSEHOLD.is_fluent(a))


def statics_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(a for a in atoms if not HOUSEHOLD.is_fluent(a))


# --- the world ------------------------------------------------------------------------

class World:
    """One stateful episode. Create with ``reset``; advance with ``step``."""

    def __init__(self, cfg: WorldConfig):
        self.cfg = cfg
        self.trace: list = []
        self.done = False
        self.success = False

    # construction
    @classmethod
    def reset(cls, cfg: WorldConfig, task_seed: int = 0):
        w = cls(cfg)
        obs, instr = w._reset(task_seed)
        return w, obs, instr

    def _reset(self, task_seed: int):
        cfg = self.cfg
        catalog = cfg.objects or CATALOG
        locs = cfg.locations or LOCATIONS
        layout_seed = [cfg.rng_seed] if cfg.dynamics is DynamicsLevel.STATIC else [cfg.rng_seed, task_seed]
        lrng = np.random.default_rng(layout_seed + [7])
        cats = sorted(catalog)
        chosen = sorted(lrng.choice(cats, size=cfg.n_objects, replace=False).tolist())
        self.objects = {f"{c}1": Entity(f"{c}1", c, frozenset(catalog[c])) for c in chosen}
        self.locations = {l: Entity(l, l, frozenset(a)) for l, a in sorted(locs.items())}
        loc_names = sorted(self.locations)
        self.pos = {}
        for o in sorted(self.objects):
            if cfg.placements and o in cfg.placements:
                self.pos[o] = cfg.placements[o]
            else:
                self.pos[o] = loc_names[int(lrng.integers(len(loc_names)))]
        self.robot = loc_names[int(lrng.integers(len(loc_names)))]
        self.held: Optional[str] = None
        self.open: set = set()
        self.hot: set = set()
        self.cold = {o for o, l in self.pos.items() if "is_cooler" in self.locations[l].attributes}
        self.clean: set = set()
        self.steps = 0
        self.task_seed = task_seed
        self.rng = np.random.default_rng([cfg.rng_seed, task_seed, 11])
        self.trace = [{"event": "reset", "rng_seed": cfg.rng_seed, "task_seed": task_seed,
                       "dynamics": cfg.dynamics.value, "p": cfg.p,
                       "attribute_mutation": cfg.dynamics is DynamicsLevel.HIGH}]
        self.instruction = self._sample_instruction(task_seed)
        self.oracle_plan = self._oracle_plan()
        obs = self.observe(full=True)
        self.initial_observation = obs
        return obs, self.instruction

    def _sample_instruction(self, task_seed: int) -> Instruction:
        rng = np.random.default_rng([self.cfg.rng_seed, task_seed, 3])
        templates = sorted(self.cfg.templates or TEMPLATES)
        for _ in range(50):
            tmpl = templates[int(rng.integers(len(templates)))]
            need = TEMPLATES[tmpl][1]
            objs = [o for o in sorted(self.objects) if need is None or need in self.objects[o].attributes]
            if not objs:
                continue
            o = objs[int(rng.integers(len(objs)))]
            targets = [l for l in sorted(self.locations) if l != self.pos.get(o)]
            l = targets[int(rng.integers(len(targets)))]
            instr = make_instruction(tmpl, self.objects[o].category, self.locations[l].category)
            self.instruction = instr
            if self._oracle_plan(instr) is not None:
                return instr
        raise UnsatisfiableTask(f"no satisfiable instruction for task seed {task_seed}")

    # state views
    def statics(self) -> frozenset:
        out = set()
        for e in self.objects.values():
            out |= {Atom("object", (_c(e.name),)), Atom(f"is_{e.category}", (_c(e.name),))}
            out |= {Atom(a, (_c(e.name),)) for a in e.attributes}
        for e in self.locations.values():
            out |= {Atom("location", (_c(e.name),)), Atom(f"is_{e.category}", (_c(e.name),))}
            out |= {Atom(a, (_c(e.name),)) for a in e.attributes}
        return frozenset(out)

    def fluents(self) -> frozenset:
        out = {Atom("robot_at", (_c(self.robot),))}
        for o, l in self.pos.items():
            out.add(Atom("at", (_c(o), _c(l))))
        if self.held:
            out.add(Atom("holding", (_c(self.held),)))
        for name, xs in (("is_open", self.open), ("is_hot", self.hot),
                         ("is_cold", self.cold), ("is_clean", self.clean)):
            out |= {Atom(name, (_c(x),)) for x in xs}
        return frozenset(out)

    def state(self) -> State:
        return State(self.fluents())

    def observe(self, full: bool = False) -> ObservationRecord:
        look = sorted(self.locations) if full else [self.robot]
        visible_objs = {o for o, l in self.pos.items() if l in look}
        if self.held:
            visible_objs.add(self.held)
        names = {_c(x) for x in visible_objs | set(look)}
        atoms = {a for a in self.statics() if a.args[0] in names}
        for a in self.fluents():
            if a.predicate == "robot_at" or a.predicate == "holding":
                atoms.add(a)
            elif a.predicate == "at" and a.args[1].name in look:
                atoms.add(a)
            elif a.predicate != "at" and a.args[0] in names:
                atoms.add(a)
        text = render_observation(atoms, look, self.robot)
        return ObservationRecord(Interpretation(frozenset(atoms)), text, self.steps,
                                 self.instruction.text)

    # dynamics
    def affordance(self, a: GroundAction) -> bool:
        args = [x.name for x in a.args]
        O = self.objects.get(args[0]) if args else None
        L = self.locations.get(args[-1]) if args else None
        if L is None or (a.schema != "go_to" and a.schema not in ("open", "close") and O is None):
            return False
        la = L.attributes
        here = self.robot == L.name
        if a.schema == "go_to":
            return len(args) == 1 and not here
        if a.schema == "close":
            return len(args) == 1 and here and L.name in self.open
        if a.schema == "open":
            return len(args) == 1 and here and "openable" in la and L.name not in self.open
        if len(args) != 2:
            return False
        accessible = "openable" not in la or L.name in self.open
        if a.schema == "pick_up":
            return self.pos.get(O.name) == L.name and here and accessible and self.held is None
        if a.schema == "put_down":
            return self.held == O.name and here and accessible
        need = {"heat": ("is_heater", "heatable"), "cool": ("is_cooler", "coolable"),
                "clean": ("is_cleaner", "cleanable")}.get(a.schema)
        if need is None:
            return False
        return self.held == O.name and here and need[0] in la and need[1] in O.attributes

    def _apply(self, a: GroundAction) -> None:
        args = [x.name for x in a.args]
        if a.schema == "go_to":
            self.robot = args[0]
        elif a.schema == "pick_up":
            self.held = args[0]
            del self.pos[args[0]]
        elif a.schema == "put_down":
            self.pos[args[0]] = args[1]
            self.held = None
        elif a.schema == "open":
            self.open.add(args[0])
        elif a.schema == "close":
            self.open.discard(args[0])
        elif a.schema == "heat":
            self.hot.add(args[0])
            self.cold.discard(args[0])
        elif a.schema == "cool":
            self.cold.add(args[0])
            self.hot.discard(args[0])
        elif a.schema == "clean":
            self.clean.add(args[0])

    def goal_met(self) -> bool:
        return goal_satisfied(self.state(), self.instruction.goal, self.statics())

    def step(self, a: GroundAction) -> ObservationRecord:
        if self.done or self.steps >= self.cfg.max_steps:
            raise EpisodeOver(f"episode finished after {self.steps} steps")
        self.steps += 1
        ok = self.affordance(a)
        if ok:
            self._apply(a)
        self.last_affordance = ok
        self.trace.append({"event": "action", "step": self.steps, "action": str(a), "affordance": ok})
        if self.goal_met():
            self.done = self.success = True
        else:
            if self.cfg.p > 0 and self.rng.random() < self.cfg.p:
                self._perturb()
            if self.goal_met():
                self.done = self.success = True
            elif self.steps >= self.cfg.max_steps:
                self.done = True
        return self.observe()

    def _goal_objects(self) -> set:
        cat = self.instruction.slots["obj"]
        return {o for o, e in self.objects.items() if e.category == cat}

    def _perturb(self) -> None:
        kinds = ["relocate"]
        if self.cfg.dynamics is DynamicsLevel.HIGH:
            kinds += ["mutate", "state", "goal"]
        kind = kinds[int(self.rng.integers(len(kinds)))]
        locs = sorted(self.locations)
        if kind == "relocate":
            movable = sorted(self.pos)
            if not movable:
                return
            o = movable[int(self.rng.integers(len(movable)))]
            dest = [l for l in locs if l != self.pos[o]]
            l = dest[int(self.rng.integers(len(dest)))]
            self.trace.append({"event": "relocate", "step": self.steps, "object": o,
                               "from": self.pos[o], "to": l})
            self.pos[o] = l
        elif kind == "mutate":
            others = sorted(set(self.objects) - self._goal_objects())
            if not others:
                return
            o = others[int(self.rng.integers(len(others)))]
            attr = OBJECT_ATTRS[int(self.rng.integers(len(OBJECT_ATTRS)))]
            e = self.objects[o]
            new = e.attributes ^ {attr}
            self.objects[o] = Entity(e.name, e.category, frozenset(new))
            self.trace.append({"event": "mutate", "step": self.steps, "object": o, "attribute": attr,
                               "value": attr in new})
        elif kind == "state":
            openables = [l for l in locs if "openable" in self.locations[l].attributes]
            if not openables:
                return
            l = openables[int(self.rng.integers(len(openables)))]
            self.open ^= {l}
            self.trace.append({"event": "state", "step": self.steps, "location": l,
                               "open": l in self.open})
        else:
            cur = self.instruction
            choices = [l for l in locs if self.locations[l].category != cur.slots["loc"]]
            l = choices[int(self.rng.integers(len(choices)))]
            self.instruction = make_instruction(cur.template, cur.slots["obj"],
                                                self.locations[l].category)
            self.trace.append({"event": "goal", "step": self.steps, "instruction": self.instruction.text})

    # evaluation helpers
    def _oracle_plan(self, instr: Optional[Instruction] = None):
        instr = instr or self.instruction
        objs = {o for o, e in self.objects.items() if e.category == instr.slots["obj"]}
        if self.held:
            objs.add(self.held)
        pl = oracle_planner(self.statics(), frozenset(objs | set(self.locations)))
        p = pl.plan(self.state(), instr.goal, self.cfg.max_steps)
        return None if p is None else tuple(p.actions)

    def goal_condition_rate(self) -> float:
        """Best fraction of goal fluent conjuncts satisfied by any typed binding."""
        goal = self.instruction.goal.clauses[0]
        fl = {a for a in self.fluents()}
        st = self.statics()
        typ = [l.atom for l in goal.body if not HOUSEHOLD.fluents.get(l.atom.predicate)]
        conj = [l.atom for l in goal.body if HOUSEHOLD.fluents.get(l.atom.predicate)]
        best = 0.0
        names = [_c(x) for x in sorted(self.objects) + sorted(self.locations)]
        from .interpretation import solutions
        for th in solutions([l for l in goal.body if l.atom in typ], Interpretation(st), {},
                            names):
            th = dict(th)
            th[goal.head.args[0]] = Constant("0")
            hits = 0
            for a in conj:
                g = Atom(a.predicate, tuple(th.get(x, x) for x in a.args[:-1]))
                hits += g in fl
            best = max(best, hits / len(conj))
        return best


def reset(cfg: WorldConfig, task_seed: int = 0):
    """Start an episode; returns (world, first observation, instruction)."""
    return World.reset(cfg, task_seed)


# --- datasets ---------------------------------------------------------------------------

class OracleExpert:
    """Follows a shortest plan under the true rules, replanning every step."""

    name = "oracle-expert"

    def __init__(self):
        self._memo = None  # (world id, expected state, instruction, statics, remaining plan)

    def next_actions(self, world: World, rng) -> list:
        state, statics = world.state(), world.statics()
        m = self._memo
        if (m and m[0] == id(world) and m[1] == state and m[2] == world.instruction
                and m[3] == statics and m[4]):
            plan = m[4]
        else:
            plan = world._oracle_plan()
        if not plan:
            self._memo = None
            return []
        held = {world.held} if world.held else set()
        objs = {o for o, e in world.objects.items() if e.category == world.instruction.slots["obj"]}
        pl = oracle_planner(statics, frozenset(objs | held | set(world.locations)))
        nxt = pl.successor(state, plan[0])
        self._memo = (id(world), nxt, world.instruction, statics, tuple(plan[1:]))
        return [plan[0]]


class RandomWithFailures(OracleExpert):
    """Expert trajectories with injected failures and occasional detours.

    Failed attempts are drawn from near misses (actions breaking exactly one
    true precondition) where possible, cycling over schemas so each one fails.
    """

    name = "random-failures"

    def __init__(self, fail_rate: float = 0.5, detour_rate: float = 0.2):
        super().__init__()
        self.fail_rate = fail_rate
        self.detour_rate = detour_rate
        self.fail_counts: dict = {}  # violated constraint -> times sampled

    def next_actions(self, world: World, rng) -> list:
        out = []
        pl = oracle_planner(world.statics())
        s = world.state()
        if rng.random() < self.fail_rate:
            near: dict = {}
            for a in pl.actions:
                if world.affordance(a):
                    continue
                v = pl.violations(s, a)
                if len(v) == 1:
                    near.setdefault(_constraint_key(v[0]), []).append(a)
            if near:
                key = min(near, key=lambda k: (self.fail_counts.get(k, 0), k))
                pool = near[key]
                out.append(pool[int(rng.integers(len(pool)))])
                self.fail_counts[key] = self.fail_counts.get(key, 0) + 1
        if rng.random() < self.detour_rate:
            ok = [a for a in pl.actions if world.affordance(a)]
            if ok:
                out.append(ok[int(rng.integers(len(ok)))])
                return out
        return out + super().next_actions(world, rng)


def _constraint_key(violation) -> str:
    pattern, rest = violation
    return ", ".join(str(x) for x in ([pattern] if pattern is not None else []) + list(rest))


POLICIES = {"oracle-expert": OracleExpert, "random-failures": RandomWithFailures}


def gen_dataset(cfg: WorldConfig, n_episodes: int, policy="random-failures",
                seed: int = 0) -> list:
    """Run a scripted policy and record episodes in the experience JSON schema."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    pol = POLICIES[policy]() if isinstance(policy, str) else policy
    rng = np.random.default_rng([cfg.rng_seed, seed, 5])
    records = []
    for ep in range(n_episodes):
        world, obs, instr = World.reset(cfg, task_seed=seed * 100_003 + ep)
        traj = {}
        k = 0
        first = obs
        while not world.done and world.steps < cfg.max_steps:
            acts = pol.next_actions(world, rng)
            if not acts:
                break
            for a in acts:
                if world.done or world.steps >= cfg.max_steps:
                    break
                nxt = world.step(a)
                traj[str(k)] = {"observation": obs.text, "action": str(a),
                                "affordance": "true" if world.last_affordance else "false",
                                "next_observation": nxt.text}
                obs = nxt
                k += 1
        records.append({"instruction": instr.text, "initial_observation": first.text,
                        "trajectory": traj})
    return records


def records_to_experiences(records: list, origin: str = "T", prefix: str = "ep") -> ExperienceSet:
    """Replay recorded episodes through the belief tracker to obtain transitions."""
    xs = ExperienceSet(origin=origin)
    for i, rec in enumerate(records):
        belief = merge_observation(None, parse_observation(rec["initial_observation"]))
        trs = []
        for key in sorted(rec["trajectory"], key=int):
            st = rec["trajectory"][key]
            pre = merge_observation(belief, parse_observation(st["observation"]))
            post = merge_observation(pre, parse_observation(st["next_observation"]))
            ok = st["affordance"]
            if ok not in ("true", "false"):
                raise ValueError(f"affordance must be 'true' or 'false', got {ok!r}")
            trs.append(Transition(Interpretation(pre), parse_atom(st["action"]),
                                  Interpretation(post), int(ok == "true")))
            belief = post
        xs.add(f"{prefix}{i}", trs)
    return xs


def save_dataset(records: list, path) -> None:
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=False) + "\n")


def load_dataset(path) -> list:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, list):
        raise ValueError("dataset file must hold a JSON array of episode records")
    keys = {"instruction", "initial_observation", "trajectory"}
    for rec in data:
        if set(rec) != keys:
            raise ValueError(f"episode record keys must be {sorted(keys)}")
    return data
