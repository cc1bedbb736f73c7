"""Angluin's L* with pluggable teachers.

Counterexamples are processed by adding every prefix to S. Membership answers
go through :class:`MembershipCache`, which doubles as the query log used to
check that the final hypothesis agrees with everything the teacher said.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import random
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Protocol

from .automata import DFA, distinguishing_word
from .dsl import serialize_scenario
from .simulator import SimConfig, run

Word = tuple


class TeacherError(Exception):
    pass


class NotClosed(Exception):
    pass


class NotConsistent(Exception):
    pass


class BudgetExhausted(Exception):
    def __init__(self, hypothesis: DFA, rounds: int):
        self.hypothesis = hypothesis
        self.rounds = rounds
        super().__init__(f"no agreement after {rounds} equivalence rounds")


class Teacher(Protocol):
    def member(self, word: Word) -> bool: ...

    def equivalent(self, hypothesis: DFA, budget: int) -> Word | None: ...


# --------------------------------------------------------------------------
# teachers


class DFATeacher:
    """Perfect teacher for a known target; equivalence searches words up to ``max_len``."""

    def __init__(self, target: DFA, max_len: int = 12):
        self.target = target
        self.max_len = max_len

    def member(self, word):
        return self.target.accepts(word)

    def equivalent(self, hypothesis, budget):
        return distinguishing_word(self.target, hypothesis, self.max_len)


class EnumerationTeacher:
    """Black-box teacher: compares on all words up to ``max_len`` in length-lex order."""

    def __init__(self, member: Callable[[Word], bool], alphabet, max_len: int = 6):
        self._member = member
        self.alphabet = tuple(alphabet)
        self.max_len = max_len

    def member(self, word):
        return self._member(tuple(word))

    def equivalent(self, hypothesis, budget):
        checked = 0
        for n in range(self.max_len + 1):
            for w in product(self.alphabet, repeat=n):
                if checked >= budget:
                    return None
                checked += 1
                if hypothesis.accepts(w) != self.member(w):
                    return w
        return None


def sample_length(rng: random.Random, max_len: int, cont: float = 0.8) -> int:
    n = 0
    while n < max_len and rng.random() < cont:
        n += 1
    return n


def random_word_equivalence(hyp: DFA, member: Callable[[Word], bool], budget: int, max_len: int,
                            rng_seed: int) -> Word | None:
    """Falsification: i.i.d. words with geometric lengths (mean 4, capped) and uniform letters."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = random.Random(rng_seed)
    for _ in range(budget):
        w = tuple(rng.choice(hyp.alphabet) for _ in range(sample_length(rng, max_len)))
        if hyp.accepts(w) != member(w):
            return w
    return None


class SimulatorTeacher:
    """Membership: does the scenario pass its oracle under this event word?"""

    def __init__(self, scenario, cfg: SimConfig = SimConfig(), max_len: int = 8, rng_seed: int = 0):
        self.scenario = scenario
        self.cfg = cfg
        self.max_len = max_len
        self.rng_seed = rng_seed
        self.rounds = 0

    def member(self, word):
        try:
            _, verdict = run(self.scenario, word, self.cfg)
        except Exception as exc:
            raise TeacherError(f"simulation failed on {[str(e) for e in word]}: {exc}") from exc
        return verdict.passed

    @property
    def cache_key(self) -> str:
        """Answers depend on the scenario and the simulator settings, nothing else."""
        blob = serialize_scenario(self.scenario) + json.dumps(dataclasses.asdict(self.cfg), sort_keys=True)
        return f"{self.scenario.name}-{hashlib.sha256(blob.encode('utf-8')).hexdigest()[:16]}"

    def equivalent(self, hypothesis, budget):
        # a fresh stream per round so repeated queries do not resample the same words
        self.rounds += 1
        return random_word_equivalence(hypothesis, self.member, budget, self.max_len,
                                       self.rng_seed * 1_000_003 + self.rounds)


def _word_key(word) -> str:
    return ",".join(map(str, word))


class MembershipCache:
    """Memoizes a teacher's membership answers; optionally persisted as JSON.

    The file maps a teacher key to ``{word: answer}``, so one file can serve
    several scenarios. Teachers without a ``cache_key`` share "default".
    """

    def __init__(self, teacher, path: str | None = None):
        self.teacher = teacher
        self.path = path
        self.key = getattr(teacher, "cache_key", "default")
        self.answers: dict[Word, bool] = {}
        self.queries = 0
        self._file: dict[str, dict[str, bool]] = {}
        if path and os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                self._file = json.load(fh)
        self._stored = self._file.setdefault(self.key, {})

    def member(self, word) -> bool:
        word = tuple(word)
        if word not in self.answers:
            key = _word_key(word)
            if key in self._stored:
                self.answers[word] = self._stored[key]
            else:
                self.queries += 1
                self.answers[word] = bool(self.teacher.member(word))
                self._stored[key] = self.answers[word]
        return self.answers[word]

    def equivalent(self, hypothesis, budget):
        return self.teacher.equivalent(hypothesis, budget)

    def save(self):
        if self.path:
            self._file[self.key] = dict(sorted(self._stored.items()))
            with open(self.path, "w", encoding="utf-8") as fh:
                json.dump(self._file, fh, indent=0, sort_keys=True)


# --------------------------------------------------------------------------
# observation table


@dataclass
class ObservationTable:
    alphabet: tuple
    S: list = field(default_factory=lambda: [()])
    E: list = field(default_factory=lambda: [()])
    T: dict = field(default_factory=dict)  # word -> bool, keyed by s + e

    def rows_needed(self):
        ext = [s + (a,) for s in self.S for a in self.alphabet]
        return self.S + [w for w in ext if w not in set(self.S)]

    def fill(self, member):
        missing = {s + e for s in self.rows_needed() for e in self.E} - self.T.keys()
        # canonical order: answers merged as if asked sequentially, shortest first
        for w in sorted(missing, key=lambda w: (len(w), [self.alphabet.index(a) for a in w])):
            self.T[w] = bool(member(w))

    def row(self, s) -> tuple:
        return tuple(self.T[s + e] for e in self.E)

    def unclosed(self):
        rows = {self.row(s) for s in self.S}
        for s in self.S:
            for a in self.alphabet:
                if self.row(s + (a,)) not in rows:
                    return s + (a,)
        return None

    def inconsistency(self):
        """A suffix ``a·e`` separating two S-words with equal rows, or None."""
        for i, s1 in enumerate(self.S):
            for s2 in self.S[i + 1:]:
                if self.row(s1) != self.row(s2):
                    continue
                for a in self.alphabet:
                    for e in self.E:
                        if self.T[s1 + (a,) + e] != self.T[s2 + (a,) + e]:
                            return (a,) + e
        return None

    def add_prefixes(self, word):
        word = tuple(word)
        for k in range(len(word) + 1):
            if word[:k] not in self.S:
                self.S.append(word[:k])


def close_and_consistify(tbl: ObservationTable, teacher) -> ObservationTable:
    member = teacher.member if hasattr(teacher, "member") else teacher
    tbl.fill(member)
    while True:
        w = tbl.unclosed()
        if w is not None:
            tbl.S.append(w)
            tbl.fill(member)
            continue
        e = tbl.inconsistency()
        if e is not None:
            tbl.E.append(e)
            tbl.fill(member)
            continue
        return tbl


def hypothesis_of(tbl: ObservationTable) -> DFA:
    if tbl.unclosed() is not None:
        raise NotClosed(f"row of {tbl.unclosed()!r} has no match in S")
    if tbl.inconsistency() is not None:
        raise NotConsistent(f"suffix {tbl.inconsistency()!r} separates equal rows")
    reps: dict[tuple, int] = {}
    words = []
    for s in tbl.S:
        r = tbl.row(s)
        if r not in reps:
            reps[r] = len(reps)
            words.append(s)
    trans = tuple(tuple(reps[tbl.row(s + (a,))] for a in tbl.alphabet) for s in words)
    accepting = frozenset(reps[tbl.row(s)] for s in words if tbl.T[s])
    return DFA(len(words), reps[tbl.row(())], accepting, trans, tuple(tbl.alphabet)).trim()


@dataclass
class LearnRun:
    hypothesis: DFA
    table: ObservationTable
    history: list[int]  # hypothesis sizes, one per equivalence query
    counterexamples: list


def learn_run(teacher, alphabet, eq_budget: int = 1000, max_rounds: int = 100) -> LearnRun:
    alphabet = tuple(alphabet)
    if not alphabet:
        raise ValueError("alphabet must be nonempty")
    if eq_budget < 1 or max_rounds < 1:
        raise ValueError("budgets must be >= 1")
    tbl = ObservationTable(alphabet)
    history, cexs = [], []
    hyp = None
    for _ in range(max_rounds):
        close_and_consistify(tbl, teacher)
        hyp = hypothesis_of(tbl)
        history.append(hyp.states)
        cex = teacher.equivalent(hyp, eq_budget)
        if cex is None:
            return LearnRun(hyp, tbl, history, cexs)
        cex = tuple(cex)
        if hyp.accepts(cex) == bool(teacher.member(cex)):
            raise TeacherError(f"counterexample {cex!r} is classified correctly by the hypothesis")
        cexs.append(cex)
        tbl.add_prefixes(cex)
    raise BudgetExhausted(hyp, max_rounds)


def learn(teacher, alphabet, eq_budget: int = 1000, max_rounds: int = 100) -> DFA:
    return learn_run(teacher, alphabet, eq_budget, max_rounds).hypothesis
