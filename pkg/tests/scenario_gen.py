"""Random scenario ASTs for round-trip and fuzzing tests.

``random_scenario`` draws from a seeded ``random.Random`` (used where a fixed
corpus is wanted); ``scenarios`` is the equivalent hypothesis strategy.
"""
from __future__ import annotations

import random

from hypothesis import strategies as st

from cpstest.dsl import (CLAUSE_KINDS, FAULT_KINDS, ROAD_TYPES, TIMES, WEATHERS, ActorSet, EgoSpec,
                         Environment, FaultSpec, Marker, OracleClause, OracleSpec, PedestrianSpec,
                         RoadNetwork, Scenario, Sign, VehicleSpec)


def _num(rng, lo, hi):
    return round(rng.uniform(lo, hi), rng.choice((0, 1, 2, 3)))


def random_scenario(rng: random.Random, name: str = "gen") -> Scenario:
    env = Environment(rng.choice(WEATHERS), rng.choice(TIMES))
    markers = tuple(Marker(k, None if k != "crosswalk" else _num(rng, 0, 200))
                    for k in rng.sample(["solid_center", "dashed_center", "crosswalk"], rng.randint(0, 3)))
    positions = sorted(rng.sample(range(20, 200), rng.randint(0, 3)))
    signs = tuple(Sign("stop", float(p)) if rng.random() < 0.5 else Sign("speed_limit", float(p), _num(rng, 5, 30))
                  for p in positions)
    fault = None
    if rng.random() < 0.6:
        guard = rng.choice([None, ("weather", rng.choice(WEATHERS)), ("time", rng.choice(TIMES))])
        fault = FaultSpec(rng.choice(FAULT_KINDS), guard)
    ego = EgoSpec(_num(rng, 0, 20), _num(rng, 0, 40), fault)
    npcs = []
    for k in range(rng.randint(0, 3)):
        beh = rng.choice(("cruise", "brake_at", "cut_in_at"))
        npcs.append(VehicleSpec(f"v{k}", _num(rng, 25, 200), _num(rng, 0, 40), beh,
                                None if beh == "cruise" else rng.randint(0, 50)))
    for k in range(rng.randint(0, 2)):
        npcs.append(PedestrianSpec(f"p{k}", _num(rng, 0, 200), _num(rng, 1, 60)))
    rng.shuffle(npcs)
    clauses = []
    for kind in rng.sample(CLAUSE_KINDS, rng.randint(1, 4)):
        if kind == "stop_at_sign":
            clauses.append(OracleClause(kind, _num(rng, 0, 3)))
        elif kind == "speed_below":
            clauses.append(OracleClause(kind, _num(rng, 1, 40)))
        elif kind == "yield_to_pedestrian":
            peds = [a.id for a in npcs if isinstance(a, PedestrianSpec)]
            clauses.append(OracleClause(kind, rng.choice(peds + [None])))
        else:
            clauses.append(OracleClause(kind))
    cut = rng.randint(0, len(clauses))
    return Scenario(name, env, RoadNetwork(rng.choice(ROAD_TYPES), markers, signs),
                    ActorSet(ego, tuple(npcs)), OracleSpec(tuple(clauses[:cut]), tuple(clauses[cut:])))


def scenarios():
    """Hypothesis strategy over scenario ASTs (shrinks toward small seeds)."""
    return st.integers(0, 2**32 - 1).map(lambda seed: random_scenario(random.Random(seed), f"s{seed}"))
