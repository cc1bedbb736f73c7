import json
import os

import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from cpstest.abstraction import LabeledTrace
from cpstest.ltl import parse_formula
from cpstest.ltl_learn import NoSeparator, TraceSample, decode, encode, learn_minimal
from cpstest.sat import solve
from tests.ltl_strategies import ATOMS, formulas, traces
from tests.oracles.ltl_bitvec import Packed, dag_size, min_consistent_size

PLANTED = os.path.join(os.path.dirname(__file__), "data", "planted_ltl.json")


def sample_of(pos, neg, atoms=ATOMS):
    return TraceSample(tuple(LabeledTrace(tuple(t), tuple(atoms)) for t in pos),
                       tuple(LabeledTrace(tuple(t), tuple(atoms)) for t in neg))


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(formulas(max_leaves=3), st.lists(traces(max_len=5), min_size=2, max_size=8, unique=True))
def test_learned_size_equals_oracle_minimum(f, ts):
    assume(dag_size(f) <= 4)
    packed = Packed(ts, ATOMS)
    bits = packed.evaluate(f)
    pos = [t for k, t in enumerate(ts) if bits >> packed.offsets[k] & 1]
    neg = [t for k, t in enumerate(ts) if not bits >> packed.offsets[k] & 1]
    assume(pos and neg)
    want = min_consistent_size(Packed(pos + neg, ATOMS), range(len(pos)), range(len(pos), len(ts)), 4)
    got = learn_minimal(sample_of(pos, neg), max_size=4)
    assert sample_of(pos, neg).is_consistent(got)
    assert got.size() == want


def test_planted_corpus_head():
    """First few frozen planted cases (the full set runs in the acceptance suite)."""
    with open(PLANTED) as fh:
        data = json.load(fh)
    for case in data["cases"][:12]:
        s = sample_of(case["positives"], case["negatives"], data["atoms"])
        f = learn_minimal(s, max_size=5)
        assert s.is_consistent(f) and f.size() == case["min_size"]


def test_known_separators():
    s = sample_of([(0, 0, 0), (0, 2)], [(0, 1, 0), (1,)])
    f = learn_minimal(s)  # e.g. G (not a) or X (not a)
    assert f.size() == 3 and s.is_consistent(f)
    pos, neg = [(1, 0), (1, 1)], [(0, 1), (1,)]
    f = learn_minimal(sample_of(pos, neg))
    assert f.size() == min_consistent_size(Packed(pos + neg, ATOMS), range(2), range(2, 4), 6)


def test_no_separator():
    with pytest.raises(NoSeparator):
        learn_minimal(sample_of([(1,)], []))
    s = sample_of([(1, 0, 1)], [(1, 0, 0), (0, 1, 1)])
    with pytest.raises(NoSeparator) as info:
        learn_minimal(s, max_size=1)
    assert info.value.max_size == 1


def test_sample_validation():
    with pytest.raises(ValueError):
        sample_of([(1,)], [(1,)])
    with pytest.raises(ValueError):
        sample_of([()], [(1,)])
    with pytest.raises(ValueError):
        TraceSample((LabeledTrace((1,), ("a",)),), (LabeledTrace((1,), ("b",)),))


def test_decode_round_trip_and_atom_restriction():
    s = sample_of([(1, 2), (3,)], [(2,), (0, 0)])
    enc = encode(1, s)
    model = solve(enc)
    assert decode(model, enc) == parse_formula("a")
    with pytest.raises(NoSeparator):
        learn_minimal(s, max_size=3, atoms=("c",))
