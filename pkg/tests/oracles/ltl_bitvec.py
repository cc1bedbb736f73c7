"""Independent LTLf machinery on packed bit-vectors.

A *sample vector* packs the truth of a formula at every position of every
trace into one Python int (traces laid end to end). Formulas here are nested
tuples: ("atom", name), (op, child) or (op, left, right). Nothing from the
package under test is used.
"""
from __future__ import annotations

UNARY = ("not", "X", "F", "G")
BINARY = ("and", "or", "U")


class Packed:
    def __init__(self, traces, predicates):
        """traces: list of letter tuples (bit i of a letter = predicate i)."""
        self.predicates = tuple(predicates)
        self.lengths = [len(t) for t in traces]
        self.offsets = []
        off = 0
        for n in self.lengths:
            self.offsets.append(off)
            off += n
        self.total = off
        self.full = (1 << off) - 1
        self.last = 0  # bits at the last position of each trace
        self.first = 0
        for o, n in zip(self.offsets, self.lengths):
            self.last |= 1 << (o + n - 1)
            self.first |= 1 << o
        self.not_last = self.full & ~self.last
        self.maxlen = max(self.lengths)
        self.atoms = {}
        for k, name in enumerate(self.predicates):
            v = 0
            for o, t in zip(self.offsets, traces):
                for i, letter in enumerate(t):
                    if letter >> k & 1:
                        v |= 1 << (o + i)
            self.atoms[name] = v

    def nxt(self, x):
        return (x >> 1) & self.not_last

    def unary(self, op, x):
        if op == "not":
            return ~x & self.full
        if op == "X":
            return self.nxt(x)
        if op == "F":
            y = x
            for _ in range(self.maxlen):
                y2 = y | self.nxt(y)
                if y2 == y:
                    break
                y = y2
            return y
        if op == "G":
            return ~self.unary("F", ~x & self.full) & self.full
        raise ValueError(op)

    def binary(self, op, a, b):
        if op == "and":
            return a & b
        if op == "or":
            return a | b
        if op == "U":
            y = b
            for _ in range(self.maxlen):
                y2 = b | (a & self.nxt(y))
                if y2 == y:
                    break
                y = y2
            return y
        raise ValueError(op)

    def trace_bit(self, k):
        return 1 << self.offsets[k]

    def evaluate(self, f):
        if f[0] == "atom":
            return self.atoms[f[1]]
        if f[0] in UNARY:
            return self.unary(f[0], self.evaluate(f[1]))
        return self.binary(f[0], self.evaluate(f[1]), self.evaluate(f[2]))


def dag_size(f) -> int:
    seen = set()

    def walk(g):
        if g in seen:
            return
        seen.add(g)
        for c in g[1:]:
            if isinstance(c, tuple):
                walk(c)

    walk(f)
    return len(seen)


def to_text(f) -> str:
    """Prefix text in the package's concrete syntax (used only to hand formulas over)."""
    def wrap(g):
        return g[1] if g[0] == "atom" else f"({to_text(g)})"

    if f[0] == "atom":
        return f[1]
    return " ".join([f[0]] + [wrap(c) for c in f[1:]])


def min_consistent_size(packed: Packed, pos_idx, neg_idx, max_size: int = 5) -> int | None:
    """Smallest syntax-DAG size of a formula true at position 0 of every
    positive trace and false at position 0 of every negative one.

    Search over *sets of semantic vectors*: a DAG of size k yields k distinct
    vectors (a minimal DAG never has two nodes with the same semantics on the
    sample), each an atom or an operator applied to vectors already present.
    """
    pos0 = sum(packed.trace_bit(k) for k in pos_idx)
    neg0 = sum(packed.trace_bit(k) for k in neg_idx)

    def ok(v):
        return v & pos0 == pos0 and v & neg0 == 0

    atoms = sorted(set(packed.atoms.values()))
    if any(ok(a) for a in atoms):
        return 1
    level = {frozenset([a]) for a in atoms}
    for k in range(2, max_size + 1):
        nxt_level = set()
        for s in level:
            members = list(s)
            cands = set(atoms)
            for x in members:
                for op in UNARY:
                    cands.add(packed.unary(op, x))
                for y in members:
                    for op in BINARY:
                        cands.add(packed.binary(op, x, y))
            cands -= s
            for v in cands:
                if ok(v):
                    return k
                if k < max_size:
                    nxt_level.add(s | {v})
        level = nxt_level
    return None
