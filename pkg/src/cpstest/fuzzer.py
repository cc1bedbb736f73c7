"""Coverage-guided fuzzing of scenarios and event words.

The coverage signal is the set of monitor residues and residue transitions
that executions reach. Each iteration picks a parent from the corpus by a
traversal policy, mutates it once and executes it. Inputs that reach new
coverage join the corpus; inputs that drive the monitor into the violated
state are counterexamples.

Executions are speculative in fixed-size batches: iteration ``i`` draws from
its own RNG seeded by ``(rng_seed, i)`` and its parent comes from the corpus
as it stood when the batch began. Results are committed in iteration order,
so the report does not depend on how many workers ran the batch.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .abstraction import PredicateSet, abstract_trace
from .dsl import (MAX_SPEED, ROAD_LENGTH, ROAD_TYPES, TIMES, WEATHERS, PedestrianSpec, Scenario,
                  VehicleSpec, serialize_scenario, validate_scenario)
from .ltl import Formula
from .monitor import MonitorAutomaton, reachable_state_bound, reachable_transitions
from .simulator import Event, SimConfig, run, scenario_alphabet

log = logging.getLogger(__name__)

OPERATORS = ("perturb", "flip", "insert", "delete", "replace", "swap")
TRAVERSALS = ("dfs", "bfs", "random_walk")
MAX_RETRIES = 8
COVERAGE_DEPTH = 10


class ReplayMismatch(Exception):
    pass


@dataclass(frozen=True)
class FuzzInput:
    scenario: Scenario
    word: tuple[Event, ...] = ()

    def key(self) -> str:
        text = serialize_scenario(self.scenario) + "\n" + ",".join(map(str, self.word))
        return hashlib.sha256(text.encode()).hexdigest()

    def to_json(self) -> dict:
        return {"scenario": serialize_scenario(self.scenario), "word": [str(e) for e in self.word]}


@dataclass(frozen=True)
class FuzzConfig:
    budget_execs: int = 10_000
    rng_seed: int = 0
    traversal: str = "bfs"
    weights: tuple[tuple[str, float], ...] = tuple((op, 1.0) for op in OPERATORS)
    stop_on_first: bool = False
    batch_size: int = 16
    workers: int = 1
    sim: SimConfig = SimConfig()

    def __post_init__(self):
        if self.budget_execs < 1:
            raise ValueError("budget_execs must be >= 1")
        if self.traversal not in TRAVERSALS:
            raise ValueError(f"traversal must be one of {TRAVERSALS}")
        w = dict(self.weights)
        if set(w) - set(OPERATORS):
            raise ValueError(f"unknown mutation operators: {sorted(set(w) - set(OPERATORS))}")
        if any(v < 0 for v in w.values()) or not any(v > 0 for v in w.values()):
            raise ValueError("mutation weights must be >= 0 and not all zero")
        if self.batch_size < 1 or self.workers < 1:
            raise ValueError("batch_size and workers must be >= 1")

    def to_json(self) -> dict:
        # worker count is deliberately left out: it must not change the report
        return {"budget_execs": self.budget_execs, "rng_seed": self.rng_seed,
                "traversal": self.traversal, "weights": dict(self.weights),
                "stop_on_first": self.stop_on_first, "batch_size": self.batch_size,
                "sim": dataclasses.asdict(self.sim)}


# --------------------------------------------------------------------------
# mutation


def _perturb(x: float, rng: random.Random, lo: float, hi: float) -> float:
    return round(min(hi, max(lo, x * (1.1 if rng.random() < 0.5 else 0.9))), 3)


def _numeric_fields(s: Scenario):
    """(path, value, lo, hi) for every mutable number in the scenario."""
    ego = s.actors.ego
    out = [(("ego", "start_position"), ego.start_position, 0.0, ROAD_LENGTH),
           (("ego", "start_speed"), ego.start_speed, 0.0, MAX_SPEED)]
    for k, a in enumerate(s.actors.npcs):
        if isinstance(a, VehicleSpec):
            out.append(((k, "start_position"), a.start_position, ego.start_position, ROAD_LENGTH))
            out.append(((k, "start_speed"), a.start_speed, 0.0, MAX_SPEED))
        else:
            out.append(((k, "crossing_position"), a.crossing_position, 0.0, ROAD_LENGTH))
            out.append(((k, "trigger_distance"), a.trigger_distance, 0.0, ROAD_LENGTH))
    return out


def _set_number(s: Scenario, path, value) -> Scenario:
    who, attr = path
    actors = s.actors
    if who == "ego":
        actors = dataclasses.replace(actors, ego=dataclasses.replace(actors.ego, **{attr: value}))
    else:
        npcs = list(actors.npcs)
        npcs[who] = dataclasses.replace(npcs[who], **{attr: value})
        actors = dataclasses.replace(actors, npcs=tuple(npcs))
    return dataclasses.replace(s, actors=actors)


def _flip(s: Scenario, rng: random.Random) -> Scenario:
    which = rng.choice(("weather", "time", "road_type"))
    if which == "weather":
        env = dataclasses.replace(s.environment,
                                  weather=rng.choice([w for w in WEATHERS if w != s.environment.weather]))
        return dataclasses.replace(s, environment=env)
    if which == "time":
        env = dataclasses.replace(s.environment,
                                  time_of_day=rng.choice([t for t in TIMES if t != s.environment.time_of_day]))
        return dataclasses.replace(s, environment=env)
    road = dataclasses.replace(s.road, road_type=rng.choice([r for r in ROAD_TYPES if r != s.road.road_type]))
    return dataclasses.replace(s, road=road)


def _apply(op: str, inp: FuzzInput, rng: random.Random, alphabet, max_len: int) -> FuzzInput:
    s, word = inp.scenario, list(inp.word)
    if op == "perturb":
        path, value, lo, hi = rng.choice(_numeric_fields(s))
        return FuzzInput(_set_number(s, path, _perturb(value, rng, lo, hi)), inp.word)
    if op == "flip":
        return FuzzInput(_flip(s, rng), inp.word)
    if op == "insert":
        if len(word) >= max_len:
            return inp
        word.insert(rng.randint(0, len(word)), rng.choice(alphabet))
    elif op == "delete":
        if not word:
            return inp
        del word[rng.randrange(len(word))]
    elif op == "replace":
        if not word:
            return inp
        word[rng.randrange(len(word))] = rng.choice(alphabet)
    elif op == "swap":
        if len(word) < 2:
            return inp
        i, j = rng.sample(range(len(word)), 2)
        word[i], word[j] = word[j], word[i]
    return FuzzInput(s, tuple(word))


def mutate(inp: FuzzInput, rng: random.Random, cfg: FuzzConfig = FuzzConfig(), alphabet=None) -> FuzzInput:
    """Apply one weighted-random operator; the result passes validation with a
    dry run, or the input comes back unchanged after ``MAX_RETRIES`` tries."""
    alphabet = tuple(alphabet or scenario_alphabet(inp.scenario))
    ops = [op for op, w in cfg.weights if w > 0]
    weights = [w for op, w in cfg.weights if w > 0]
    for _ in range(MAX_RETRIES):
        op = rng.choices(ops, weights)[0]
        out = _apply(op, inp, rng, alphabet, cfg.sim.max_steps)
        if out is inp:
            continue
        if out.scenario is inp.scenario or validate_scenario(out.scenario, True, cfg.sim).ok:
            return out
    return inp


# --------------------------------------------------------------------------
# coverage and corpus


@dataclass
class CoverageMap:
    states_hit: set = field(default_factory=set)
    transitions_hit: set = field(default_factory=set)

    def novelty(self, mrun) -> int:
        states = {str(r) for r in mrun.states} - self.states_hit
        trans = {(str(a), p, str(b)) for a, p, b in mrun.transitions} - self.transitions_hit
        return len(states) + len(trans)

    def update(self, mrun):
        self.states_hit |= {str(r) for r in mrun.states}
        self.transitions_hit |= {(str(a), p, str(b)) for a, p, b in mrun.transitions}


@dataclass
class CorpusEntry:
    input: FuzzInput
    novelty: int
    iteration: int
    final: Formula
    depth: int  # residue changes along the entry's own run
    key: str


@dataclass
class Counterexample:
    input: FuzzInput
    iteration: int
    path: list[str]
    key: str

    def to_json(self) -> dict:
        return {**self.input.to_json(), "path": self.path, "iteration": self.iteration,
                "input_hash": self.key}


@dataclass
class Corpus:
    entries: list[CorpusEntry] = field(default_factory=list)
    counterexamples: list[Counterexample] = field(default_factory=list)
    keys: set = field(default_factory=set)


def select_next(corpus: Corpus, monitor: MonitorAutomaton, traversal: str, rng: random.Random,
                coverage: CoverageMap | None = None) -> CorpusEntry:
    if not corpus.entries:
        raise ValueError("corpus is empty")
    entries = corpus.entries
    if traversal == "random_walk":
        return entries[rng.randrange(len(entries))]
    if traversal == "dfs":
        return min(entries, key=lambda e: (-e.depth, e.iteration, e.key))
    if traversal != "bfs":
        raise ValueError(f"unknown traversal {traversal!r}")
    hit = coverage.transitions_hit if coverage is not None else \
        {(str(a), p, str(b)) for (a, p), b in monitor.transitions.items()}
    letters = range(1 << len(monitor.atoms))
    open_sources = {}

    def frontier(e):
        r = e.final
        if r not in open_sources:
            done = {p for (a, p, _) in hit if a == str(r)}
            open_sources[r] = monitor.classify(r) == "pending" and any(p not in done for p in letters)
        return open_sources[r]

    candidates = [e for e in entries if frontier(e)] or entries
    return min(candidates, key=lambda e: (e.depth, e.iteration, e.key))


# --------------------------------------------------------------------------
# execution


def execute(inp: FuzzInput, sim: SimConfig):
    """Simulate and abstract; returns the letter sequence or an error string."""
    try:
        trace, _ = run(inp.scenario, inp.word, sim)
        return abstract_trace(trace, PredicateSet.for_scenario(inp.scenario)).letters
    except Exception as exc:
        return f"{type(exc).__name__}: {exc}"


def _execute_star(args):
    return execute(*args)


def _depth(mrun) -> int:
    return sum(1 for a, _, b in mrun.transitions if a != b)


def _collapsed(mrun) -> tuple:
    out = []
    for t in mrun.transitions:
        if not out or out[-1] != t:
            out.append(t)
    return tuple((str(a), p, str(b)) for a, p, b in out)


@dataclass
class FuzzReport:
    config: dict
    formula: str
    coverage: dict
    counterexamples: list[Counterexample]
    executions: int
    skipped: int
    corpus_size: int

    def to_json(self) -> dict:
        return {"config": self.config, "formula": self.formula, "rng_seed": self.config["rng_seed"],
                "coverage": self.coverage,
                "counterexamples": [c.to_json() for c in self.counterexamples],
                "executions": self.executions, "skipped": self.skipped, "corpus_size": self.corpus_size}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


class _Fuzzer:
    def __init__(self, phi: Formula, cfg: FuzzConfig):
        self.phi = phi
        self.cfg = cfg
        self.monitor = MonitorAutomaton(phi, PredicateSet().names)
        self.coverage = CoverageMap()
        self.corpus = Corpus()
        self.cex_paths: set = set()
        self.executions = 0
        self.skipped = 0

    def commit(self, inp: FuzzInput, letters, iteration: int) -> bool:
        """Fold one execution result in; True if it was a counterexample."""
        self.executions += 1
        if isinstance(letters, str):
            self.skipped += 1
            log.warning("iteration %d skipped: %s", iteration, letters)
            return False
        mrun = self.monitor.run(letters)
        novelty = self.coverage.novelty(mrun)
        self.coverage.update(mrun)
        key = inp.key()
        if novelty > 0 and key not in self.corpus.keys:
            self.corpus.keys.add(key)
            self.corpus.entries.append(CorpusEntry(inp, novelty, iteration, mrun.final, _depth(mrun), key))
        if mrun.verdict != "violated":
            return False
        sig = _collapsed(mrun)
        if sig not in self.cex_paths:
            self.cex_paths.add(sig)
            self.corpus.counterexamples.append(Counterexample(inp, iteration, mrun.path, key))
        return True


def fuzz(seeds, phi: Formula, cfg: FuzzConfig = FuzzConfig()) -> FuzzReport:
    seeds = [s if isinstance(s, FuzzInput) else FuzzInput(s) for s in seeds]
    if not seeds:
        raise ValueError("seed corpus is empty")
    for s in seeds:
        if not validate_scenario(s.scenario, True, cfg.sim).ok:
            raise ValueError(f"seed scenario {s.scenario.name!r} is invalid")
    f = _Fuzzer(phi, cfg)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        _loop(f, seeds, cfg, pool)
    finally:
        if pool is not None:
            pool.shutdown()
    for c in f.corpus.counterexamples:
        _, path = replay(c.input, phi, cfg.sim)
        if path != c.path:
            raise ReplayMismatch(f"counterexample {c.key[:12]} replays to a different residue path")
    cexs = sorted(f.corpus.counterexamples, key=lambda c: (c.iteration, c.key))
    return FuzzReport(cfg.to_json(), str(phi), _coverage(f, phi), cexs, f.executions, f.skipped,
                      len(f.corpus.entries))


def _run_batch(batch, sim, pool):
    if pool is None:
        return [execute(inp, sim) for inp in batch]
    return list(pool.map(_execute_star, [(inp, sim) for inp in batch]))


def _loop(f: _Fuzzer, seeds, cfg: FuzzConfig, pool):
    budget = cfg.budget_execs
    iteration = 0
    for start in range(0, min(len(seeds), budget), cfg.batch_size):
        batch = seeds[start:min(start + cfg.batch_size, budget)]
        for inp, letters in zip(batch, _run_batch(batch, cfg.sim, pool)):
            hit = f.commit(inp, letters, iteration)
            iteration += 1
            if hit and cfg.stop_on_first:
                return
    if not f.corpus.entries:
        # nothing novel at all can only happen if every seed failed to execute
        return
    while iteration < budget:
        n = min(cfg.batch_size, budget - iteration)
        batch = []
        for i in range(iteration, iteration + n):
            rng = random.Random(f"{cfg.rng_seed}:{i}")
            parent = select_next(f.corpus, f.monitor, cfg.traversal, rng, f.coverage)
            batch.append(mutate(parent.input, rng, cfg))
        for inp, letters in zip(batch, _run_batch(batch, cfg.sim, pool)):
            hit = f.commit(inp, letters, iteration)
            iteration += 1
            if hit and cfg.stop_on_first:
                return


def _coverage(f: _Fuzzer, phi: Formula) -> dict:
    names = PredicateSet().names
    states = {str(r) for r in reachable_state_bound(phi, COVERAGE_DEPTH, predicates=names)}
    trans = {(str(a), p, str(b)) for a, p, b in reachable_transitions(phi, COVERAGE_DEPTH, predicates=names)}
    s_hit = len(states & f.coverage.states_hit)
    t_hit = len(trans & f.coverage.transitions_hit)
    return {"states_pct": round(100.0 * s_hit / len(states), 2),
            "transitions_pct": round(100.0 * t_hit / len(trans), 2) if trans else 100.0,
            "states_hit": s_hit, "states_total": len(states),
            "transitions_hit": t_hit, "transitions_total": len(trans)}


def replay(inp: FuzzInput, phi: Formula, sim: SimConfig = SimConfig()):
    """Re-execute ``inp``; returns (trace, residue path). Path is empty unless violated."""
    trace, _ = run(inp.scenario, inp.word, sim)
    letters = abstract_trace(trace, PredicateSet.for_scenario(inp.scenario)).letters
    mrun = MonitorAutomaton(phi, PredicateSet().names).run(letters)
    return trace, (mrun.path if mrun.verdict == "violated" else [])
