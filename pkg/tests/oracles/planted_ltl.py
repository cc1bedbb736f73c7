"""Generate the frozen planted-formula corpus for the minimal-learner check.

Run ``python -m tests.oracles.planted_ltl`` from the repository root to
rewrite ``tests/data/planted_ltl.json``. Formulas are random syntax DAGs of
size <= 5 over three atoms; traces are random and labeled by the bit-vector
evaluator; the minimum separating size comes from ``min_consistent_size``.
"""
from __future__ import annotations

import json
import random
import sys
import time
from pathlib import Path

from .ltl_bitvec import BINARY, UNARY, Packed, dag_size, min_consistent_size, to_text

ATOMS = ("a", "b", "c")
OUT = Path(__file__).resolve().parent.parent / "data" / "planted_ltl.json"


def random_formula(rng: random.Random, size: int):
    """Random formula whose syntax DAG has exactly ``size`` nodes (or None)."""
    nodes = [("atom", rng.choice(ATOMS))]
    while len(nodes) < size * 3:
        if rng.random() < 0.5:
            f = (rng.choice(UNARY), rng.choice(nodes))
        else:
            left, right = rng.choice(nodes), rng.choice(nodes)
            if left == right:
                continue
            f = (rng.choice(BINARY), left, right)
        if rng.random() < 0.3:
            f = ("atom", rng.choice(ATOMS))
        nodes.append(f)
        if dag_size(f) == size:
            return f
    return None


def sample(rng: random.Random, f, n_each=10, max_len=8, tries=4000):
    pos, neg = [], []
    seen = set()
    for _ in range(tries):
        t = tuple(rng.randrange(8) for _ in range(rng.randint(1, max_len)))
        if t in seen:
            continue
        seen.add(t)
        truth = Packed([t], ATOMS).evaluate(f) & 1
        bucket = pos if truth else neg
        if len(bucket) < n_each:
            bucket.append(t)
        if len(pos) == n_each and len(neg) == n_each:
            return pos, neg
    return None


def build(count=50, seed=2024):
    rng = random.Random(seed)
    cases = []
    while len(cases) < count:
        size = rng.choices(range(1, 6), weights=(1, 1, 2, 4, 6))[0]
        f = random_formula(rng, size)
        if f is None:
            continue
        got = sample(rng, f)
        if got is None:
            continue
        pos, neg = got
        packed = Packed(pos + neg, ATOMS)
        assert packed.evaluate(f) & sum(packed.trace_bit(k) for k in range(20)) == \
            sum(packed.trace_bit(k) for k in range(10))
        t0 = time.perf_counter()
        best = min_consistent_size(packed, range(10), range(10, 20), max_size=size)
        assert best is not None and best <= size
        cases.append({"planted": to_text(f), "planted_size": size, "min_size": best,
                      "positives": [list(t) for t in pos], "negatives": [list(t) for t in neg]})
        print(f"{len(cases):2d} size {size} min {best} {time.perf_counter() - t0:6.2f}s {to_text(f)}",
              file=sys.stderr)
    return {"atoms": list(ATOMS), "seed": seed, "cases": cases}


if __name__ == "__main__":
    data = build()
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT}", file=sys.stderr)
