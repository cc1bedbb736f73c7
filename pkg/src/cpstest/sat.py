"""A small CDCL SAT solver.

Two watched literals, first-UIP clause learning with non-chronological
backjumping, VSIDS-style activity ordering with phase saving, and Luby
restarts (base 64 conflicts). Everything is deterministic: the same CNF
always yields the same assignment.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field


@dataclass
class CNF:
    num_vars: int = 0
    clauses: list[list[int]] = field(default_factory=list)

    def new_var(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add(self, *lits: int):
        self.clauses.append(list(lits))

    def to_dimacs(self) -> str:
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        lines += [" ".join(map(str, c)) + " 0" for c in self.clauses]
        return "\n".join(lines) + "\n"


def luby(i: int) -> int:
    """i-th element (0-based) of the Luby sequence 1,1,2,1,1,2,4,..."""
    size, seq = 1, 0
    while size < i + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != i:
        size = (size - 1) >> 1
        seq -= 1
        i = i % size
    return 1 << seq


def verify(cnf: CNF, assignment: dict[int, bool]) -> bool:
    """Independent check that ``assignment`` satisfies every clause."""
    for clause in cnf.clauses:
        if not any(assignment.get(abs(l)) == (l > 0) for l in clause):
            return False
    return True


class Solver:
    RESTART_BASE = 64
    DECAY = 0.95

    def __init__(self, num_vars: int, clauses):
        n = num_vars
        self.n = n
        self.value = [0] * (n + 1)  # 1 true, -1 false, 0 unassigned
        self.level = [0] * (n + 1)
        self.reason: list[int | None] = [None] * (n + 1)
        self.activity = [0.0] * (n + 1)
        self.phase = [False] * (n + 1)
        self.var_inc = 1.0
        self.clauses: list[list[int]] = []
        self.watches: list[list[int]] = [[] for _ in range(2 * n + 2)]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.ok = True
        self.conflicts = 0
        self.heap = [(0.0, v) for v in range(1, n + 1)]
        for c in clauses:
            self._add_input(c)

    @staticmethod
    def _w(lit: int) -> int:
        return 2 * lit if lit > 0 else -2 * lit + 1

    def _val(self, lit: int) -> int:
        v = self.value[lit if lit > 0 else -lit]
        return v if lit > 0 else -v

    def _add_input(self, lits):
        if not self.ok:
            return
        clause = []
        for l in dict.fromkeys(lits):
            if l == 0 or abs(l) > self.n:
                raise ValueError(f"literal {l} out of range 1..{self.n}")
            if -l in clause:
                return  # tautology
            clause.append(l)
        clause = [l for l in clause if self._val(l) != -1]
        if any(self._val(l) == 1 for l in clause):
            return
        if not clause:
            self.ok = False
        elif len(clause) == 1:
            self._enqueue(clause[0], None)
            if self._propagate() is not None:
                self.ok = False
        else:
            self._attach(clause)

    def _attach(self, clause: list[int]) -> int:
        ci = len(self.clauses)
        self.clauses.append(clause)
        self.watches[self._w(clause[0])].append(ci)
        self.watches[self._w(clause[1])].append(ci)
        return ci

    def _enqueue(self, lit: int, reason: int | None):
        v = lit if lit > 0 else -lit
        self.value[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def _propagate(self) -> int | None:
        value = self.value
        clauses = self.clauses
        watches = self.watches
        trail = self.trail
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = watches[2 * false_lit if false_lit > 0 else -2 * false_lit + 1]
            i = j = 0
            end = len(ws)
            while i < end:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                fv = value[first] if first > 0 else -value[-first]
                if fv == 1:
                    ws[j] = ci
                    j += 1
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if (value[lk] if lk > 0 else -value[-lk]) != -1:
                        c[1], c[k] = lk, false_lit
                        watches[2 * lk if lk > 0 else -2 * lk + 1].append(ci)
                        break
                else:
                    ws[j] = ci
                    j += 1
                    if fv == -1:
                        while i < end:
                            ws[j] = ws[i]
                            j += 1
                            i += 1
                        del ws[j:]
                        return ci
                    self._enqueue(first, ci)
            del ws[j:]
        return None

    def _bump(self, v: int):
        act = self.activity
        act[v] += self.var_inc
        if act[v] > 1e100:
            for u in range(1, self.n + 1):
                act[u] *= 1e-100
            self.var_inc *= 1e-100
            self._rebuild_heap()
        elif self.value[v] == 0:
            heapq.heappush(self.heap, (-act[v], v))

    def _rebuild_heap(self):
        self.heap = [(-self.activity[v], v) for v in range(1, self.n + 1) if self.value[v] == 0]
        heapq.heapify(self.heap)

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        seen = set()
        level = self.level
        current = len(self.trail_lim)
        learnt = [0]
        path = 0
        p = 0
        index = len(self.trail) - 1
        clause = self.clauses[confl]
        while True:
            for q in (clause if p == 0 else clause[1:]):
                v = q if q > 0 else -q
                if v not in seen and level[v] > 0:
                    seen.add(v)
                    self._bump(v)
                    if level[v] >= current:
                        path += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[index]) not in seen:
                index -= 1
            p = self.trail[index]
            index -= 1
            seen.discard(abs(p))
            path -= 1
            if path == 0:
                break
            clause = self.clauses[self.reason[abs(p)]]
        learnt[0] = -p
        if len(learnt) == 1:
            return learnt, 0
        best = max(range(1, len(learnt)), key=lambda k: level[abs(learnt[k])])
        learnt[1], learnt[best] = learnt[best], learnt[1]
        return learnt, level[abs(learnt[1])]

    def _backtrack(self, lvl: int):
        if len(self.trail_lim) <= lvl:
            return
        stop = self.trail_lim[lvl]
        for lit in self.trail[stop:]:
            v = abs(lit)
            self.phase[v] = lit > 0
            self.value[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[stop:]
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)
        if len(self.heap) > 4 * self.n + 64:
            self._rebuild_heap()

    def _decide(self) -> int:
        heap = self.heap
        while heap:
            neg_act, v = heapq.heappop(heap)
            if self.value[v] == 0 and -neg_act == self.activity[v]:
                return v if self.phase[v] else -v
        for v in range(1, self.n + 1):  # stale heap fallback
            if self.value[v] == 0:
                return v if self.phase[v] else -v
        return 0

    def solve(self) -> list[int] | None:
        """Return a satisfying assignment as a list indexed by variable, or None."""
        if not self.ok:
            return None
        if self._propagate() is not None:
            return None
        restarts = 0
        budget = self.RESTART_BASE * luby(restarts)
        since_restart = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                self.conflicts += 1
                since_restart += 1
                if not self.trail_lim:
                    return None
                learnt, back = self._analyze(confl)
                self._backtrack(back)
                if len(learnt) == 1:
                    self._enqueue(learnt[0], None)
                else:
                    ci = self._attach(learnt)
                    self._enqueue(learnt[0], ci)
                self.var_inc /= self.DECAY
                continue
            if since_restart >= budget:
                restarts += 1
                budget = self.RESTART_BASE * luby(restarts)
                since_restart = 0
                self._backtrack(0)
                continue
            lit = self._decide()
            if lit == 0:
                return list(self.value)
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)


def solve(cnf: CNF) -> dict[int, bool] | None:
    """Satisfying assignment {var: bool} for every variable, or None if unsat."""
    values = Solver(cnf.num_vars, cnf.clauses).solve()
    if values is None:
        return None
    return {v: values[v] == 1 for v in range(1, cnf.num_vars + 1)}
