"""Drafting scenarios with a text-generation model, behind a validation loop.

Nothing the model writes is trusted. Each candidate goes through parsing,
semantic validation and a simulator dry run; failures are sent back with the
diagnostics for repair, a bounded number of times.
"""
from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .dsl import ParseError, Scenario, ValidationReport, parse_scenario, syntax_report, validate_scenario

PROMPT_VERSION = "1"
GENERATION_TEMPERATURE = 0.7
REPAIR_TEMPERATURE = 0.0
MAX_TOKENS = 1024

GRAMMAR_DOC = """\
A scenario is four blocks in this order inside `scenario NAME { ... }`:

environment { weather: clear|rain|fog; time: day|night; }
road { type: straight|intersection;
       markers: [solid_center, dashed_center, crosswalk @ POS, ...];
       signs: [stop @ POS, speed_limit(V) @ POS, ...]; }
actors {
  ego { position: POS; speed: V;
        controller: rule_follower | faulted(KIND[, weather = W]); }
  vehicle ID { position: POS; speed: V; behavior: cruise | brake_at(STEP) | cut_in_at(STEP); }
  pedestrian ID { crossing: POS; trigger: DIST; }
}
oracle { longitudinal: [CLAUSE, ...]; lateral: [CLAUSE, ...]; }

KIND is ignore_stop_sign, ignore_lead_vehicle or ignore_pedestrian.
CLAUSE is no_collision, stop_at_sign(OVERSHOOT), yield_to_pedestrian[(ID)] or speed_below(V).
Positions are meters along a 200 m road, speeds are m/s in [0, 40].
Every vehicle must start ahead of the ego, and the ego must start far enough
from every stop sign and vehicle to be able to brake for it.
Numbers are written with a decimal point, e.g. 30.0.
"""


class ProviderError(Exception):
    pass


class Provider(Protocol):
    def complete(self, prompt: str, params: dict) -> str: ...


class MockProvider:
    """Replays scripted replies in order; records every request it receives."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.requests: list[tuple[str, dict]] = []

    @classmethod
    def from_file(cls, path) -> "MockProvider":
        with open(path, encoding="utf-8") as fh:
            replies = json.load(fh)
        if not isinstance(replies, list) or not all(isinstance(r, str) for r in replies):
            raise ValueError("mock script must be a JSON array of strings")
        return cls(replies)

    def complete(self, prompt, params):
        self.requests.append((prompt, dict(params)))
        if len(self.requests) > len(self.replies):
            raise ProviderError("mock script exhausted")
        return self.replies[len(self.requests) - 1]


class HttpProvider:
    """JSON over HTTP: POST {prompt, max_tokens, temperature[, model]} -> {text}."""

    def __init__(self, endpoint: str, api_key: str | None = None, model: str | None = None,
                 timeout: float = 60.0, attempts: int = 3, backoff: float = 1.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self.sleep = sleep

    @classmethod
    def from_env(cls, **kw) -> "HttpProvider":
        endpoint = os.environ.get("CPSTEST_LLM_ENDPOINT")
        if not endpoint:
            raise ProviderError("CPSTEST_LLM_ENDPOINT is not set")
        return cls(endpoint, os.environ.get("CPSTEST_LLM_API_KEY"), os.environ.get("CPSTEST_LLM_MODEL"), **kw)

    def _request(self, body: bytes) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.endpoint, data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise ProviderError("response has no 'text' field")
        return payload["text"]

    def complete(self, prompt, params):
        body = {"prompt": prompt, "max_tokens": params.get("max_tokens", MAX_TOKENS),
                "temperature": params.get("temperature", GENERATION_TEMPERATURE)}
        if self.model:
            body["model"] = self.model
        data = json.dumps(body).encode("utf-8")
        last = None
        for attempt in range(self.attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                return self._request(data)
            except (urllib.error.URLError, OSError, ValueError, ProviderError) as exc:
                last = exc
        raise ProviderError(f"request failed after {self.attempts} attempts: {last}")


def build_prompt(rule_text: str, grammar_doc: str, n: int) -> str:
    if not rule_text.strip() or not grammar_doc.strip() or n < 1:
        raise ValueError("rule text and grammar must be nonempty and n >= 1")
    return (f"[prompt v{PROMPT_VERSION}]\n"
            f"You write driving test scenarios in a small DSL.\n\n"
            f"Grammar:\n{grammar_doc}\n"
            f"Traffic rules:\n{rule_text}\n\n"
            f"Write scenario {n} of a set of {n} scenarios (vary them) that checks "
            f"whether a vehicle obeys these rules. Reply with the scenario text only.\n")


def build_repair_prompt(rule_text: str, grammar_doc: str, previous: str, report: ValidationReport) -> str:
    problems = "\n".join(f"- [{d.stage}] {d.code}: {d.message}" for d in report.diagnostics)
    return (f"[prompt v{PROMPT_VERSION} repair]\n"
            f"Grammar:\n{grammar_doc}\n"
            f"Traffic rules:\n{rule_text}\n\n"
            f"This scenario was rejected:\n{previous}\n\n"
            f"Problems:\n{problems}\n\n"
            f"Reply with a corrected scenario only.\n")


def _strip_fences(text: str) -> str:
    lines = text.strip().splitlines()
    if lines and lines[0].startswith("```"):
        lines = lines[1:]
        if lines and lines[-1].startswith("```"):
            lines = lines[:-1]
    return "\n".join(lines)


def check_candidate(text: str, sim_cfg=None) -> tuple[Scenario | None, ValidationReport]:
    """Parse, validate and dry-run one candidate text."""
    body = _strip_fences(text)
    try:
        s = parse_scenario(body)
    except ParseError as err:
        return None, syntax_report(err, body)
    report = validate_scenario(s, run_dry=True, cfg=sim_cfg)
    return (s if report.ok else None), report


@dataclass
class GenerationJob:
    rule_text: str
    count: int = 1
    max_repair_rounds: int = 3

    def __post_init__(self):
        if not self.rule_text.strip():
            raise ValueError("rule_text must be nonempty")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.max_repair_rounds < 0:
            raise ValueError("max_repair_rounds must be >= 0")


@dataclass
class Accepted:
    scenario: Scenario
    candidate: int
    repair_round: int
    texts: list[str]  # every raw reply, in order

    def to_json(self) -> dict:
        from .dsl import serialize_scenario

        return {"candidate": self.candidate, "repair_round": self.repair_round,
                "scenario": serialize_scenario(self.scenario), "raw_texts": self.texts}


@dataclass
class Rejected:
    candidate: int
    texts: list[str]
    report: ValidationReport

    def to_json(self) -> dict:
        return {"candidate": self.candidate, "raw_texts": self.texts, "report": self.report.to_json()}


@dataclass
class GenerationResult:
    accepted: list[Accepted] = field(default_factory=list)
    rejected: list[Rejected] = field(default_factory=list)
    aborted: str | None = None
    prompt_version: str = PROMPT_VERSION

    def to_json(self) -> dict:
        return {"prompt_version": self.prompt_version, "aborted": self.aborted,
                "accepted": [a.to_json() for a in self.accepted],
                "rejected": [r.to_json() for r in self.rejected]}


def generate_scenarios(job: GenerationJob, provider: Provider, sim_cfg=None,
                       grammar_doc: str = GRAMMAR_DOC) -> GenerationResult:
    result = GenerationResult()
    for k in range(1, job.count + 1):
        texts: list[str] = []
        try:
            text = provider.complete(build_prompt(job.rule_text, grammar_doc, k),
                                     {"max_tokens": MAX_TOKENS, "temperature": GENERATION_TEMPERATURE})
            texts.append(text)
            scenario, report = check_candidate(text, sim_cfg)
            rounds = 0
            while scenario is None and rounds < job.max_repair_rounds:
                rounds += 1
                text = provider.complete(build_repair_prompt(job.rule_text, grammar_doc, text, report),
                                         {"max_tokens": MAX_TOKENS, "temperature": REPAIR_TEMPERATURE})
                texts.append(text)
                scenario, report = check_candidate(text, sim_cfg)
        except ProviderError as exc:
            result.aborted = f"candidate {k}: {exc}"
            if texts:
                result.rejected.append(Rejected(k, texts, report))
            break
        if scenario is not None:
            result.accepted.append(Accepted(scenario, k, rounds, texts))
        else:
            result.rejected.append(Rejected(k, texts, report))
    return result
