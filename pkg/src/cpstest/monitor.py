"""Runtime monitors for LTLf properties via formula progression.

Reading a letter rewrites the property into the obligation left for the rest
of the trace (its *residue*). Residues are kept in a canonical form so that
syntactic equality is state identity, which makes the monitor a DFA over
residues. A residue from which no continuation (including stopping right
here) can satisfy the property is collapsed to ``false``; one that every
continuation satisfies is collapsed to ``true``. ``false`` is the violated
state: the prefix read so far is a bad prefix. Liveness obligations that are
merely unmet on a finite prefix stay pending.

Progression uses one internal constant, ``nonempty``, for the strong-next
obligation "at least one more letter must follow".
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .ltl import (FALSE, NONEMPTY, TRUE, And, Atom, Const, Finally, Formula, Globally, Next,
                  Nonempty, Not, Or, Until)


class StateExplosion(Exception):
    def __init__(self, partial, cap):
        self.partial = partial
        self.cap = cap
        super().__init__(f"more than {cap} residues; {len(partial)} collected")


def at_end(f: Formula) -> bool:
    """Truth of a residue on the empty remainder (the trace stops here)."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, (Atom, Nonempty, Next, Finally, Until)):
        return False
    if isinstance(f, Globally):
        return True
    if isinstance(f, Not):
        return not at_end(f.arg)
    if isinstance(f, And):
        return all(at_end(a) for a in f.args)
    if isinstance(f, Or):
        return any(at_end(a) for a in f.args)
    raise TypeError(f"unknown formula {f!r}")


def _leaf(f: Formula, memo: dict) -> Formula:
    """Canonical form of a non-Boolean node (its operands are canonicalized)."""
    hit = memo.get(f)
    if hit is not None:
        return hit
    if isinstance(f, (Const, Atom, Nonempty)):
        out = f
    elif isinstance(f, Until):
        left, right = canonical(f.left), canonical(f.right)
        out = FALSE if right == FALSE else Until(left, right)
    else:
        a = canonical(f.arg)
        if isinstance(f, Next):
            out = FALSE if a == FALSE else Next(a)
        elif isinstance(f, Finally):
            out = FALSE if a == FALSE else Finally(a)
        else:
            out = TRUE if a == TRUE else Globally(a)
    memo[f] = out
    return out


def _collect(f: Formula, memo: dict, leaves: set) -> None:
    if isinstance(f, (Not, And, Or)):
        for a in f.args:
            _collect(a, memo, leaves)
        return
    g = _leaf(f, memo)
    if not isinstance(g, Const):
        leaves.add(g)


def _table(f: Formula, memo: dict, cols: dict, full: int) -> int:
    if isinstance(f, Not):
        return ~_table(f.arg, memo, cols, full) & full
    if isinstance(f, And):
        out = full
        for a in f.args:
            out &= _table(a, memo, cols, full)
        return out
    if isinstance(f, Or):
        out = 0
        for a in f.args:
            out |= _table(a, memo, cols, full)
        return out
    g = memo[f]
    if isinstance(g, Const):
        return full if g.value else 0
    return cols[g]


def _primes(minterms: list[int], n: int) -> list[tuple[int, int]]:
    """Prime implicants as (value, don't-care mask) pairs (Quine-McCluskey)."""
    current = {(m, 0) for m in minterms}
    primes = set()
    while current:
        merged = set()
        used = set()
        for v, mask in current:
            for k in range(n):
                bit = 1 << k
                if mask & bit or v & bit:
                    continue
                if (v | bit, mask) in current:
                    merged.add((v, mask | bit))
                    used.add((v, mask))
                    used.add((v | bit, mask))
        primes |= current - used
        current = merged
    return sorted(primes)


def canonical(f: Formula) -> Formula:
    """Canonical representative of ``f`` up to propositional equivalence.

    Non-Boolean subterms (atoms, ``nonempty`` and temporal operators) are
    treated as propositional variables. The result is the disjunction of all
    prime implicants of the resulting Boolean function, restricted to the
    variables it depends on. Every variable except ``nonempty`` and ``G ...``
    is false on an empty remainder, so it implies ``nonempty``; assignments
    that break this are don't-cares, resolved so that ``nonempty`` is dropped
    whenever another literal already forces a next letter.
    """
    memo: dict[Formula, Formula] = {}
    leaf_set: set[Formula] = set()
    _collect(f, memo, leaf_set)
    leaves = sorted(leaf_set)
    n = len(leaves)
    size = 1 << n
    full = (1 << size) - 1
    cols = {}
    for k, leaf in enumerate(leaves):
        col = 0
        for a in range(size):
            if a >> k & 1:
                col |= 1 << a
        cols[leaf] = col
    tt = _table(f, memo, cols, full)
    vals = [tt >> a & 1 for a in range(size)]
    if NONEMPTY in leaf_set:
        nbit = 1 << leaves.index(NONEMPTY)
        forcing = 0
        for k, leaf in enumerate(leaves):
            if leaf != NONEMPTY and not isinstance(leaf, Globally):
                forcing |= 1 << k
        for a in range(size):
            if not a & nbit and a & forcing:
                vals[a] = vals[a | nbit]
    support = [k for k in range(n) if any(vals[a] != vals[a ^ (1 << k)] for a in range(size))]
    minterms = []
    for a in range(size):
        if vals[a] and all(not a >> k & 1 for k in range(n) if k not in support):
            minterms.append(sum(1 << j for j, k in enumerate(support) if a >> k & 1))
    if not minterms:
        return FALSE
    if len(minterms) == 1 << len(support):
        return TRUE
    names = [leaves[k] for k in support]
    terms = set()
    for v, mask in _primes(minterms, len(support)):
        lits = [names[j] if v >> j & 1 else Not(names[j])
                for j in range(len(support)) if not mask >> j & 1]
        terms.add(lits[0] if len(lits) == 1 else And(lits))
    terms = sorted(terms)
    return terms[0] if len(terms) == 1 else Or(terms)


def _prog(f: Formula, letter) -> Formula:
    if isinstance(f, Const):
        return f
    if isinstance(f, Nonempty):
        return TRUE
    if isinstance(f, Atom):
        return TRUE if f.name in letter else FALSE
    if isinstance(f, Not):
        return Not(_prog(f.arg, letter))
    if isinstance(f, And):
        return And([_prog(a, letter) for a in f.args])
    if isinstance(f, Or):
        return Or([_prog(a, letter) for a in f.args])
    if isinstance(f, Next):
        return And((f.arg, NONEMPTY))
    if isinstance(f, Globally):
        return And((_prog(f.arg, letter), f))
    if isinstance(f, Finally):
        return Or((_prog(f.arg, letter), f))
    if isinstance(f, Until):
        return Or((_prog(f.right, letter), And((_prog(f.left, letter), f))))
    raise TypeError(f"unknown formula {f!r}")


def progress(f: Formula, letter) -> Formula:
    """Residue of ``f`` after one letter (a collection of the atom names that hold)."""
    return canonical(_prog(f, letter))


def _letters(atoms):
    n = len(atoms)
    return [frozenset(a for k, a in enumerate(atoms) if m >> k & 1) for m in range(1 << n)]


def satisfiable(f: Formula, cap: int = 10_000) -> bool | None:
    """Does some finite continuation (possibly empty) satisfy residue ``f``?

    ``None`` when the residue closure exceeds ``cap``.
    """
    letters = _letters(sorted(f.atoms()))
    seen = {f}
    queue = deque([f])
    while queue:
        g = queue.popleft()
        if at_end(g):
            return True
        for a in letters:
            h = progress(g, a)
            if h not in seen:
                if len(seen) >= cap:
                    return None
                seen.add(h)
                queue.append(h)
    return False


@dataclass
class MonitorRun:
    final: Formula
    verdict: str  # violated | satisfied | pending
    states: list[Formula]  # distinct, in order of first visit
    transitions: list[tuple[Formula, int, Formula]]  # in order taken, letters projected

    @property
    def path(self) -> list[str]:
        return [str(self.transitions[0][0]) if self.transitions else str(self.final)] + \
            [str(dst) for _, _, dst in self.transitions]


class MonitorAutomaton:
    """Lazily built residue automaton for ``phi`` over a predicate vocabulary."""

    def __init__(self, phi: Formula, predicates=None, cap: int = 10_000):
        self.phi = phi
        self.cap = cap
        names = tuple(predicates) if predicates is not None else tuple(sorted(phi.atoms()))
        missing = phi.atoms() - set(names)
        if missing:
            raise ValueError(f"formula uses atoms outside the predicate set: {sorted(missing)}")
        self.predicates = names
        self.atoms = tuple(n for n in names if n in phi.atoms())
        self._bits = [names.index(a) for a in self.atoms]
        self._norm: dict[Formula, Formula] = {}
        self.transitions: dict[tuple[Formula, int], Formula] = {}
        self.initial = self.normalize(canonical(phi))
        self.states: dict[Formula, None] = {self.initial: None}

    def project(self, letter: int) -> int:
        out = 0
        for k, b in enumerate(self._bits):
            if letter >> b & 1:
                out |= 1 << k
        return out

    def letter_names(self, projected: int) -> frozenset:
        return frozenset(a for k, a in enumerate(self.atoms) if projected >> k & 1)

    def normalize(self, r: Formula) -> Formula:
        if isinstance(r, Const):
            return r
        cached = self._norm.get(r)
        if cached is None:
            if satisfiable(r, self.cap) is False:
                cached = FALSE
            elif satisfiable(canonical(Not(r)), self.cap) is False:
                cached = TRUE
            else:
                cached = r
            self._norm[r] = cached
        return cached

    def classify(self, r: Formula) -> str:
        if r == FALSE:
            return "violated"
        if r == TRUE:
            return "satisfied"
        return "pending"

    def step(self, r: Formula, projected: int) -> Formula:
        key = (r, projected)
        nxt = self.transitions.get(key)
        if nxt is None:
            nxt = self.normalize(progress(r, self.letter_names(projected)))
            self.transitions.setdefault(key, nxt)
            self.states.setdefault(nxt, None)
        return nxt

    def run(self, letters) -> MonitorRun:
        r = self.initial
        states = {r: None}
        taken = []
        if self.classify(r) == "pending":
            for letter in letters:
                p = self.project(letter)
                nxt = self.step(r, p)
                taken.append((r, p, nxt))
                states.setdefault(nxt, None)
                r = nxt
                if self.classify(r) != "pending":
                    break
        return MonitorRun(r, self.classify(r), list(states), taken)

    def to_dot(self) -> str:
        order = {s: k for k, s in enumerate(self.states)}
        lines = ["digraph monitor {", "  rankdir=LR;", '  __start [shape=point];']
        for s, k in order.items():
            shape = "doublecircle" if s == FALSE else "circle"
            lines.append(f'  s{k} [shape={shape}, label="{_escape(str(s))}"];')
        lines.append(f"  __start -> s{order[self.initial]};")
        for (src, p), dst in sorted(self.transitions.items(), key=lambda kv: (order[kv[0][0]], kv[0][1])):
            label = " & ".join(a if p >> k & 1 else "!" + a for k, a in enumerate(self.atoms)) or "*"
            lines.append(f'  s{order[src]} -> s{order[dst]} [label="{_escape(label)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def monitor_run(m: MonitorAutomaton, t) -> MonitorRun:
    """Fold progression over the letters of labeled trace ``t`` (stops at a verdict)."""
    letters = t.letters
    if tuple(t.predicates) != m.predicates:
        idx = [t.predicates.index(n) for n in m.predicates]
        letters = [sum(1 << k for k, b in enumerate(idx) if x >> b & 1) for x in letters]
    return m.run(letters)


def reachable_state_bound(phi: Formula, max_depth: int, cap: int = 10_000, order: str = "bfs",
                          seed: int = 0, predicates=None) -> list[Formula]:
    """Residues reachable from ``phi`` within ``max_depth`` letters, in visit order."""
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if order not in ("bfs", "dfs", "random_walk"):
        raise ValueError(f"unknown order {order!r}")
    m = MonitorAutomaton(phi, predicates, cap=cap)
    letters = range(1 << len(m.atoms))
    depth = {m.initial: 0}
    frontier = [m.initial]
    rng = random.Random(seed)
    while frontier:
        if order == "dfs":
            r = frontier.pop()
        elif order == "random_walk":
            r = frontier.pop(rng.randrange(len(frontier)))
        else:
            r = frontier.pop(0)
        if depth[r] >= max_depth or m.classify(r) != "pending":
            continue
        for p in letters:
            nxt = m.step(r, p)
            if nxt not in depth or depth[nxt] > depth[r] + 1:
                if nxt not in depth and len(depth) >= cap:
                    raise StateExplosion(list(depth), cap)
                depth[nxt] = depth[r] + 1
                frontier.append(nxt)
    return list(depth)


def reachable_transitions(phi: Formula, max_depth: int, cap: int = 10_000, predicates=None) -> set:
    """(src, projected letter, dst) triples out of pending residues within ``max_depth``.

    Letters are projected onto the formula's atoms in ``predicates`` order.
    """
    m = MonitorAutomaton(phi, predicates, cap=cap)
    states = reachable_state_bound(phi, max_depth, cap, predicates=predicates)
    out = set()
    for r in states:
        if m.classify(r) == "pending":
            for p in range(1 << len(m.atoms)):
                out.add((r, p, m.step(r, p)))
    return out


CLAUSE_FORMULAS = {
    "no_collision": "G (not collision)",
    "stop_at_sign": "G (or (not in_stop_zone) ego_stopped)",
    "yield_to_pedestrian": "G (or (not ped_on_road) (not collision))",
    "speed_below": "G (not speeding)",
}


def formula_for_clause(kind: str) -> Formula:
    """Safety property over the standard predicates that mirrors an oracle clause."""
    from .ltl import parse_formula

    return parse_formula(CLAUSE_FORMULAS[kind])


def formula_for_oracle(oracle) -> Formula:
    parts = list(dict.fromkeys(formula_for_clause(c.kind) for c in oracle.clauses))
    return parts[0] if len(parts) == 1 else canonical(And(parts))
