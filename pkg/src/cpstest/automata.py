"""Complete deterministic finite automata over a finite alphabet."""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass


@dataclass(frozen=True)
class DFA:
    """States are ``0..states-1``; ``transitions[q][k]`` is the successor of
    ``q`` on ``alphabet[k]``."""

    states: int
    initial: int
    accepting: frozenset
    transitions: tuple[tuple[int, ...], ...]
    alphabet: tuple

    def __post_init__(self):
        if not 0 <= self.initial < self.states:
            raise ValueError("initial state out of range")
        if len(self.transitions) != self.states:
            raise ValueError("one transition row per state required")
        for row in self.transitions:
            if len(row) != len(self.alphabet) or any(not 0 <= q < self.states for q in row):
                raise ValueError("transition function must be total over the alphabet")
        if any(not 0 <= q < self.states for q in self.accepting):
            raise ValueError("accepting state out of range")

    def letter_index(self, a) -> int:
        try:
            return self.alphabet.index(a)
        except ValueError:
            raise KeyError(f"letter {a!r} not in alphabet") from None

    def run(self, word) -> int:
        q = self.initial
        for a in word:
            q = self.transitions[q][self.letter_index(a)]
        return q

    def accepts(self, word) -> bool:
        return self.run(word) in self.accepting

    def reachable(self) -> list[int]:
        """States in BFS order from the initial state, letters in alphabet order."""
        order = [self.initial]
        seen = {self.initial}
        for q in order:
            for r in self.transitions[q]:
                if r not in seen:
                    seen.add(r)
                    order.append(r)
        return order

    def renumber(self, order: list[int]) -> "DFA":
        """Keep only the states in ``order``; state ``order[i]`` becomes ``i``."""
        new = {q: i for i, q in enumerate(order)}
        return DFA(len(order), new[self.initial],
                   frozenset(new[q] for q in order if q in self.accepting),
                   tuple(tuple(new[r] for r in self.transitions[q]) for q in order),
                   self.alphabet)

    def trim(self) -> "DFA":
        return self.renumber(self.reachable())

    def minimize(self) -> "DFA":
        """Moore partition refinement on the reachable part, canonically numbered."""
        d = self.trim()
        ids: dict[bool, int] = {}
        block = [ids.setdefault(q in d.accepting, len(ids)) for q in range(d.states)]
        count = len(ids)
        while True:
            sigs = {}
            nxt = []
            for q in range(d.states):
                sig = (block[q],) + tuple(block[r] for r in d.transitions[q])
                nxt.append(sigs.setdefault(sig, len(sigs)))
            done = len(sigs) == count
            block, count = nxt, len(sigs)
            if done:
                break
        reps = {}
        for q in range(d.states):
            reps.setdefault(block[q], q)
        quotient = DFA(count, block[d.initial],
                       frozenset(block[q] for q in d.accepting),
                       tuple(tuple(block[r] for r in d.transitions[reps[b]]) for b in range(count)),
                       d.alphabet)
        return quotient.trim()

    def with_alphabet_order(self, alphabet) -> "DFA":
        alphabet = tuple(alphabet)
        if sorted(map(str, alphabet)) != sorted(map(str, self.alphabet)):
            raise ValueError("alphabets differ")
        idx = [list(map(str, self.alphabet)).index(str(a)) for a in alphabet]
        return DFA(self.states, self.initial, self.accepting,
                   tuple(tuple(row[k] for k in idx) for row in self.transitions), alphabet)

    def to_json(self) -> dict:
        return {"states": self.states, "initial": self.initial,
                "accepting": sorted(self.accepting),
                "transitions": [list(r) for r in self.transitions],
                "alphabet": [str(a) for a in self.alphabet]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def from_json(cls, d: dict, parse_letter=None) -> "DFA":
        alphabet = tuple(parse_letter(a) if parse_letter else a for a in d["alphabet"])
        return cls(d["states"], d["initial"], frozenset(d["accepting"]),
                   tuple(tuple(r) for r in d["transitions"]), alphabet)

    def to_dot(self) -> str:
        lines = ["digraph dfa {", "  rankdir=LR;", "  __start [shape=point];"]
        for q in range(self.states):
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  q{q} [shape={shape}, label="{q}"];')
        lines.append(f"  __start -> q{self.initial};")
        for q in range(self.states):
            for k, r in enumerate(self.transitions[q]):
                label = str(self.alphabet[k]).replace('"', '\\"')
                lines.append(f'  q{q} -> q{r} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def dfa_accepts(d: DFA, w) -> bool:
    return d.accepts(w)


def dfa_isomorphic(a: DFA, b: DFA) -> bool:
    """Same language, i.e. isomorphic minimal automata (alphabets matched by name)."""
    if sorted(map(str, a.alphabet)) != sorted(map(str, b.alphabet)):
        return False
    ma = a.minimize()
    mb = b.with_alphabet_order(a.alphabet).minimize()
    return (ma.states, ma.initial, ma.accepting, ma.transitions) == \
        (mb.states, mb.initial, mb.accepting, mb.transitions)


def distinguishing_word(a: DFA, b: DFA, max_len: int | None = None):
    """Shortest word accepted by exactly one of ``a``/``b`` (product BFS), or None.

    ``max_len`` bounds the search depth; ``None`` searches the full product.
    """
    b = b.with_alphabet_order(a.alphabet)
    start = (a.initial, b.initial)
    parent = {start: None}
    queue = deque([(start, 0)])
    while queue:
        (p, q), depth = queue.popleft()
        if (p in a.accepting) != (q in b.accepting):
            word = []
            node = (p, q)
            while parent[node] is not None:
                node, k = parent[node]
                word.append(a.alphabet[k])
            return tuple(reversed(word))
        if max_len is not None and depth >= max_len:
            continue
        for k in range(len(a.alphabet)):
            nxt = (a.transitions[p][k], b.transitions[q][k])
            if nxt not in parent:
                parent[nxt] = ((p, q), k)
                queue.append((nxt, depth + 1))
    return None
