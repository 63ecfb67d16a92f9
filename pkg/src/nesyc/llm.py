"""Chat-completion backed hypothesis generation and observation parsing.

Nothing else in the package imports this module at test time. Requests go
to any endpoint speaking the common ``/chat/completions`` JSON protocol; a
fixture directory (request hash -> response text) replays recorded answers
offline. Replies are scanned for rule lines and parsed; parse diagnostics are
sent back for a bounded number of repair rounds.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .domain import HOUSEHOLD, Domain, action_atom
from .errors import EndpointError, UnparseableAfterRetries, VocabularyViolation
from .interpretation import Example, Interpretation
from .logic import Program
from .lptext import TIME_VAR, ParseDiagnostic, parse_program, print_program

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib


@dataclass
class LlmEndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    top_p: float = 1.0
    max_new_tokens: int = 256
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_repair_retries: int = 2
    fixtures_dir: Optional[str] = None
    record: bool = False  # write live responses into fixtures_dir

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_repair_retries < 0:
            raise ValueError("max_repair_retries must be >= 0")

    @classmethod
    def from_file(cls, path) -> "LlmEndpointConfig":
        p = Path(path)
        data = tomllib.loads(p.read_text()) if p.suffix == ".toml" else json.loads(p.read_text())
        data = data.get("llm", data)
        return cls(**data)


# --- prompts -------------------------------------------------------------------------------

@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    @property
    def slots(self) -> set:
        return {f for _, f, _, _ in string.Formatter().parse(self.text) if f}

    def render(self, **values) -> str:
        missing = self.slots - set(values)
        if missing:
            raise ValueError(f"{self.name}: unfilled slots {sorted(missing)}")
        return self.text.format(**{k: values[k] for k in self.slots})


_LFI_PRIMER = """\
Learning from interpretations: each example is a set of ground facts. A
hypothesis H is acceptable when every positive example is a model of H together
with the background knowledge B and no negative example is.
Worked case: B = {{father(henry,bill). father(alan,betsy). father(alan,benny).
mother(beth,bill). mother(ann,betsy). mother(alice,benny).}}
positives: {{carrier(alan), carrier(ann), carrier(betsy)}}, {{carrier(benny), carrier(alan), carrier(alice)}}
negative: {{carrier(henry), carrier(beth)}}
carrier(X) :- mother(Y,X), carrier(Y), father(Z,X), carrier(Z).  is acceptable;
carrier(X) :- mother(Y,X), father(Z,X).  is not.
"""

BACKGROUND_KNOWLEDGE = PromptTemplate("BackgroundKnowledge", (
    "You are an inductive logic programming assistant working in answer set programming.\n\n"
    + _LFI_PRIMER +
    "\nAvailable predicates:\n{predicates}\n\n"
    "Write background knowledge rules that would help separate the positive\n"
    "examples below from the negative ones. Use only the predicates listed.\n"
    "Answer with rules only, one per line, each ending with a period.\n\n"
    "Examples:\n{positive_negative_examples}\n"))

HYPOTHESIS_WITH_SUBSUMPTION = PromptTemplate("HypothesisWithSubsumption", (
    "You are an inductive logic programming assistant working in answer set programming.\n"
    "Integrity constraints have the form ':- body.' and forbid any state where the body holds.\n\n"
    + _LFI_PRIMER +
    "\nAvailable predicates:\n{predicates}\n\n"
    "Interpreter feedback on the current hypothesis:\n{interpreter_feedback}\n\n"
    "Write integrity constraints on the target action that every positive example\n"
    "satisfies and every negative example violates. Order candidate rules by\n"
    "theta-subsumption and keep the most general ones. Use only the listed\n"
    "predicates. Answer with rules only, one per line.\n\n"
    "Examples:\n{positive_negative_examples}\n\n"
    "Background knowledge:\n{background_knowledge}\n\n"
    "Target action:\n{target_action_predicate}\n"))

SEMANTIC_PARSE = PromptTemplate("SemanticParse", (
    "Translate the observation into ground facts. Use only these predicates:\n"
    "{predicates}\n\nAnswer with facts only, one per line, each ending with a period.\n\n"
    "Observation:\n{observation}\n"))


def render_predicates(domain: Domain = HOUSEHOLD, vocabulary: Optional[dict] = None) -> str:
    voc = vocabulary if vocabulary is not None else {**domain.statics, **{
        p: n + 1 for p, n in domain.fluents.items()}, "action": 2}
    return "\n".join(f"{p}/{n}" for p, n in sorted(voc.items()))


def render_examples(batch: Sequence[Example]) -> str:
    """One line per example: label, id and its facts in canonical order."""
    lines = []
    for i, e in enumerate(batch, 1):
        tag = "E+" if e.positive else "E-"
        facts = ", ".join(sorted(str(a) for a in e.interp.atoms))
        lines.append(f"{tag} {e.id or f'e{i}'} = {{{facts}}}")
    return "\n".join(lines)


# --- transport --------------------------------------------------------------------------------

def request_hash(body: dict) -> str:
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:32]


class ChatClient:
    """Blocking chat-completion client; shareable across threads like httpx.Client."""

    def __init__(self, cfg: LlmEndpointConfig, transport: Optional[httpx.BaseTransport] = None):
        self.cfg = cfg
        self._transport = transport
        self._http: Optional[httpx.Client] = None
        self.requests: list = []  # dispatched bodies, newest last

    def _client(self) -> httpx.Client:
        if self._http is None:
            headers = {}
            key = os.environ.get(self.cfg.api_key_env) if self.cfg.api_key_env else None
            if key:
                headers["Authorization"] = f"Bearer {key}"
            self._http = httpx.Client(base_url=self.cfg.base_url, timeout=self.cfg.timeout,
                                      headers=headers, transport=self._transport)
        return self._http

    def body(self, messages: list) -> dict:
        return {"model": self.cfg.model_name, "messages": messages,
                "temperature": self.cfg.temperature, "top_p": self.cfg.top_p,
                "max_tokens": self.cfg.max_new_tokens}

    def complete(self, messages: list) -> str:
        body = self.body(messages)
        self.requests.append(body)
        fx = Path(self.cfg.fixtures_dir) if self.cfg.fixtures_dir else None
        if fx is not None and not self.cfg.record:
            path = fx / f"{request_hash(body)}.txt"
            if not path.exists():
                raise EndpointError(f"no recorded response for request {path.name}")
            return path.read_text()
        try:
            r = self._client().post("/chat/completions", json=body)
            r.raise_for_status()
            text = r.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise EndpointError(f"chat completion failed: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise EndpointError(f"malformed chat completion response: {exc}") from exc
        if fx is not None:
            fx.mkdir(parents=True, exist_ok=True)
            (fx / f"{request_hash(body)}.txt").write_text(text)
        return text

    def close(self) -> None:
        if self._http is not None:
            self._http.close()


# --- reply handling --------------------------------------------------------------------------

_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")
_RULEISH = re.compile(r"^(?::-|[a-z_][A-Za-z0-9_]*\s*\(|[a-z_][A-Za-z0-9_]*\s*[.:]|\d+\s*\{|\{|#)")


def extract_rules(reply: str) -> str:
    """Keep the lines that look like program statements; drop prose and code fences."""
    out = []
    for line in reply.splitlines():
        s = line.strip()
        if not s or s.startswith("```") or s.startswith("%"):
            continue
        s = _BULLET.sub("", s).strip("`").strip()
        if _RULEISH.match(s) and (s.endswith(".") or ":-" in s or "(" in s):
            out.append(s)
    return "\n".join(out)


@dataclass
class RepairResult:
    program: Program
    retries: int
    diagnostics: list = field(default_factory=list)


def ask_for_program(client: ChatClient, prompt: str, retries: int,
                    check=None) -> RepairResult:
    """Send ``prompt``; on unparseable replies send the diagnostics back and retry."""
    messages = [{"role": "user", "content": prompt}]
    history: list = []
    for attempt in range(retries + 1):
        reply = client.complete(messages)
        text = extract_rules(reply)
        if not text:
            diags = [ParseDiagnostic(1, 1, "no rule lines found in the reply")]
        else:
            res = parse_program(text)
            diags = res if isinstance(res, list) else []
            if not diags and check is not None:
                diags = check(res)
            if not diags:
                return RepairResult(res, attempt, history)
        history.extend(diags)
        if attempt == retries:
            break
        detail = "\n".join(str(d) for d in diags)
        messages = messages + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": "Those rules could not be parsed:\n" + detail
             + "\nReply with the corrected rules only."}]
    raise UnparseableAfterRetries(f"no parseable reply after {retries} repair round(s)", history)


# --- operations --------------------------------------------------------------------------------

def _targets(batch: Sequence[Example], domain: Domain) -> str:
    names = set()
    for e in batch:
        for a in e.interp.atoms:
            if a.predicate == "action" and a.arity == 2:
                inner = a.args[0]
                names.add(getattr(inner, "functor", getattr(inner, "name", None)))
    chs = [domain.schemas[n] for n in sorted(n for n in names if n in domain.schemas)]
    return "\n".join(str(action_atom(ch.action, TIME_VAR)) for ch in chs) or "action(A, T)"


def llm_generate(batch: Sequence[Example], current_h: Program = Program(), fb=None,
                 cfg: Optional[LlmEndpointConfig] = None, client: Optional[ChatClient] = None,
                 domain: Domain = HOUSEHOLD, stats: Optional[dict] = None) -> tuple:
    """Background knowledge prompt, then the hypothesis prompt; returns (H, BK)."""
    cfg = cfg or LlmEndpointConfig()
    client = client or ChatClient(cfg)
    preds = render_predicates(domain)
    block = render_examples(batch)
    bk = ask_for_program(client, BACKGROUND_KNOWLEDGE.render(
        predicates=preds, positive_negative_examples=block), cfg.max_repair_retries)
    feedback = getattr(fb, "message", "") or "none yet"
    if current_h.clauses:
        feedback += "\nCurrent hypothesis:\n" + print_program(current_h)
    h = ask_for_program(client, HYPOTHESIS_WITH_SUBSUMPTION.render(
        predicates=preds, interpreter_feedback=feedback, positive_negative_examples=block,
        background_knowledge=print_program(bk.program) or "none",
        target_action_predicate=_targets(batch, domain)), cfg.max_repair_retries)
    if stats is not None:
        stats["retries"] = stats.get("retries", 0) + bk.retries + h.retries
    return h.program, bk.program


class LlmGenerator:
    """Hypothesis generator backed by a chat endpoint, for the reformulation loop."""

    def __init__(self, cfg: LlmEndpointConfig, domain: Domain = HOUSEHOLD,
                 client: Optional[ChatClient] = None):
        self.cfg = cfg
        self.domain = domain
        self.client = client or ChatClient(cfg)
        self.stats: dict = {}

    def start(self, examples=()) -> None:
        pass

    def __call__(self, batch, current_h=None, feedback=None):
        h, bk = llm_generate(batch, current_h or Program(), feedback, self.cfg, self.client,
                             self.domain, self.stats)
        return [h], bk


def _facts_only(prog: Program) -> list:
    return [ParseDiagnostic(1, 1, f"expected a ground fact, got {c}")
            for c in prog.clauses if c.head is None or c.body or not c.head.is_ground()]


def llm_semantic_parse(text_observation: str, cfg: Optional[LlmEndpointConfig] = None,
                       client: Optional[ChatClient] = None, domain: Domain = HOUSEHOLD,
                       vocabulary: Optional[dict] = None) -> Interpretation:
    """Facts for a free-text observation, restricted to the registered predicates."""
    if not text_observation.strip():
        return Interpretation(frozenset())
    cfg = cfg or LlmEndpointConfig()
    client = client or ChatClient(cfg)
    res = ask_for_program(client, SEMANTIC_PARSE.render(
        predicates=render_predicates(domain, vocabulary), observation=text_observation),
        cfg.max_repair_retries, _facts_only)
    atoms = frozenset(c.head for c in res.program.clauses)
    bad = sorted({f"{a.predicate}/{a.arity}" for a in atoms
                  if not (vocabulary.get(a.predicate) == a.arity if vocabulary is not None
                          else domain.knows(a.predicate))})
    if bad:
        raise VocabularyViolation(f"unregistered predicates in parse: {', '.join(bad)}")
    return Interpretation(atoms)
