"""Learning size-minimal LTLf formulas from positive and negative traces.

The search follows the syntax-DAG encoding: a formula of size ``n`` is a
sequence of nodes ``0..n-1`` where node ``i`` carries one label (an atom or
an operator) and points to children with smaller indices; node ``n-1`` is the
root. Semantic variables ``y[i, trace, pos]`` hold the truth of node ``i``
at each trace position. Two helper variables per node and position carry the
value of the left and right child, so child selection costs O(n^2) clauses
instead of O(n^3).
"""
from __future__ import annotations

from dataclasses import dataclass

from .abstraction import LabeledTrace
from .ltl import (And, Atom, Finally, Formula, Globally, Next, Not, Or, Until, eval_ltlf)
from .sat import CNF, solve, verify

UNARY_OPS = ("not", "X", "F", "G")
BINARY_OPS = ("and", "or", "U")


class NoSeparator(Exception):
    def __init__(self, max_size: int, reason: str = ""):
        self.max_size = max_size
        super().__init__(reason or f"no consistent formula of size <= {max_size}")


class DecodeError(Exception):
    pass


@dataclass(frozen=True)
class TraceSample:
    positives: tuple[LabeledTrace, ...]
    negatives: tuple[LabeledTrace, ...]

    def __post_init__(self):
        traces = self.positives + self.negatives
        if any(len(t.letters) == 0 for t in traces):
            raise ValueError("traces must be nonempty")
        if len({t.predicates for t in traces}) > 1:
            raise ValueError("all traces must share one predicate set")
        if {t.letters for t in self.positives} & {t.letters for t in self.negatives}:
            raise ValueError("a trace is labeled both positive and negative")

    @property
    def predicates(self) -> tuple[str, ...]:
        traces = self.positives + self.negatives
        return traces[0].predicates if traces else ()

    def is_consistent(self, f: Formula) -> bool:
        return (all(eval_ltlf(f, t, 0) for t in self.positives)
                and not any(eval_ltlf(f, t, 0) for t in self.negatives))


class Encoding(CNF):
    """CNF plus the variable maps needed to decode a model back into a formula."""

    def __init__(self, n: int, sample: TraceSample, atoms=None):
        super().__init__()
        self.n = n
        self.sample = sample
        self.atoms = tuple(atoms if atoms is not None else sample.predicates)
        self.labels = self.atoms + UNARY_OPS + BINARY_OPS
        self._build()

    def _build(self):
        n, sample = self.n, self.sample
        traces = list(sample.positives) + list(sample.negatives)
        index = {name: k for k, name in enumerate(sample.predicates)}
        positions = [(t, p) for t in range(len(traces)) for p in range(len(traces[t].letters))]
        last = [len(t.letters) - 1 for t in traces]
        new = self.new_var
        add = self.add

        self.lab = [{lam: new() for lam in self.labels} for _ in range(n)]
        self.left = [{j: new() for j in range(i)} for i in range(n)]
        self.right = [{j: new() for j in range(i)} for i in range(n)]
        y = [{tp: new() for tp in positions} for _ in range(n)]
        self.y = y

        for i in range(n):
            lv = list(self.lab[i].values())
            add(*lv)
            for a in range(len(lv)):
                for b in range(a + 1, len(lv)):
                    add(-lv[a], -lv[b])
            if i == 0:
                for op in UNARY_OPS + BINARY_OPS:
                    add(-self.lab[0][op])
                continue
            for children in (self.left[i], self.right[i]):
                cv = list(children.values())
                add(*cv)
                for a in range(len(cv)):
                    for b in range(a + 1, len(cv)):
                        add(-cv[a], -cv[b])

        for i in range(n):
            lab = self.lab[i]
            yi = y[i]
            for name in self.atoms:
                g = lab[name]
                bit = index[name]
                for (t, p), v in yi.items():
                    add(-g, v if traces[t].letters[p] >> bit & 1 else -v)
            if i == 0:
                continue
            L = {tp: new() for tp in positions}
            R = {tp: new() for tp in positions}
            for children, vals in ((self.left[i], L), (self.right[i], R)):
                for j, c in children.items():
                    yj = y[j]
                    for tp, v in vals.items():
                        add(-c, -v, yj[tp])
                        add(-c, v, -yj[tp])
            g = lab["not"]
            for tp, v in yi.items():
                add(-g, -v, -L[tp])
                add(-g, v, L[tp])
            g = lab["and"]
            for tp, v in yi.items():
                add(-g, -v, L[tp])
                add(-g, -v, R[tp])
                add(-g, v, -L[tp], -R[tp])
            g = lab["or"]
            for tp, v in yi.items():
                add(-g, v, -L[tp])
                add(-g, v, -R[tp])
                add(-g, -v, L[tp], R[tp])
            gx, gf, gg, gu = lab["X"], lab["F"], lab["G"], lab["U"]
            for (t, p), v in yi.items():
                if p == last[t]:
                    add(-gx, -v)
                    for gop, src in ((gf, L), (gg, L), (gu, R)):
                        add(-gop, -v, src[t, p])
                        add(-gop, v, -src[t, p])
                    continue
                nxt = yi[t, p + 1]
                add(-gx, -v, L[t, p + 1])
                add(-gx, v, -L[t, p + 1])
                # F: v <-> L or next
                add(-gf, v, -L[t, p])
                add(-gf, v, -nxt)
                add(-gf, -v, L[t, p], nxt)
                # G: v <-> L and next
                add(-gg, -v, L[t, p])
                add(-gg, -v, nxt)
                add(-gg, v, -L[t, p], -nxt)
                # U: v <-> R or (L and next)
                add(-gu, v, -R[t, p])
                add(-gu, v, -L[t, p], -nxt)
                add(-gu, -v, R[t, p], L[t, p])
                add(-gu, -v, R[t, p], nxt)

        root = y[n - 1]
        for t in range(len(traces)):
            add(root[t, 0] if t < len(sample.positives) else -root[t, 0])


def encode(n: int, sample: TraceSample, atoms=None) -> Encoding:
    if n < 1:
        raise ValueError("size must be >= 1")
    return Encoding(n, sample, atoms)


def decode(assignment: dict[int, bool], enc: Encoding) -> Formula:
    """Read the formula out of a model of ``enc``; verified against the sample."""
    nodes: list[Formula] = []
    for i in range(enc.n):
        labels = [lam for lam, v in enc.lab[i].items() if assignment.get(v)]
        if len(labels) != 1:
            raise DecodeError(f"node {i} has labels {labels}")
        lam = labels[0]
        if lam in enc.atoms:
            nodes.append(Atom(lam))
            continue
        lefts = [j for j, v in enc.left[i].items() if assignment.get(v)]
        rights = [j for j, v in enc.right[i].items() if assignment.get(v)]
        if len(lefts) != 1 or (lam in BINARY_OPS and len(rights) != 1):
            raise DecodeError(f"node {i} has malformed child pointers")
        a = nodes[lefts[0]]
        if lam == "not":
            nodes.append(Not(a))
        elif lam == "X":
            nodes.append(Next(a))
        elif lam == "F":
            nodes.append(Finally(a))
        elif lam == "G":
            nodes.append(Globally(a))
        else:
            b = nodes[rights[0]]
            nodes.append({"and": lambda: And((a, b)), "or": lambda: Or((a, b)),
                          "U": lambda: Until(a, b)}[lam]())
    f = nodes[-1]
    if not enc.sample.is_consistent(f):
        raise DecodeError(f"decoded formula {f} is inconsistent with the sample")
    return f


def learn_minimal(sample: TraceSample, max_size: int = 8, atoms=None) -> Formula:
    """Smallest formula true on every positive and false on every negative trace."""
    if not sample.negatives:
        raise NoSeparator(0, "no negative traces to separate from")
    for n in range(1, max_size + 1):
        enc = encode(n, sample, atoms)
        model = solve(enc)
        if model is None:
            continue
        if not verify(enc, model):
            raise DecodeError("solver returned a non-satisfying assignment")
        return decode(model, enc)
    raise NoSeparator(max_size)
