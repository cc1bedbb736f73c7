"""Boolean abstraction of simulator traces.

Every simulator state becomes one *letter*: an integer whose bit ``i`` holds
predicate ``i`` of the predicate set. The standard order is fixed:

    bit 0  collision      some ego gap is below the collision gap
    bit 1  ego_stopped    ego speed <= 0.1 m/s
    bit 2  in_stop_zone   ego is inside a stop sign's controlled area, from
                          ``stop_zone`` meters before the sign to 10 m past it
    bit 3  ped_on_road    some pedestrian is on the road
    bit 4  speeding       ego speed > speed limit (default 20 m/s)
    bit 5  braking        the ego braked during the step into this state
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .simulator import Trace, Verdict, _World

STANDARD_PREDICATES = ("collision", "ego_stopped", "in_stop_zone", "ped_on_road", "speeding", "braking")
DEFAULT_SPEED_LIMIT = 20.0
STOP_AREA_BEYOND = 10.0
STOPPED_SPEED = 0.1


@dataclass(frozen=True)
class PredicateSet:
    names: tuple[str, ...] = STANDARD_PREDICATES
    speed_limit: float = DEFAULT_SPEED_LIMIT

    @classmethod
    def for_scenario(cls, s) -> "PredicateSet":
        limits = [c.param for c in s.oracle.clauses if c.kind == "speed_below"]
        return cls(speed_limit=min(limits) if limits else DEFAULT_SPEED_LIMIT)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_json(self) -> list[str]:
        return [f"speeding({self.speed_limit})" if n == "speeding" else n for n in self.names]


@dataclass(frozen=True)
class LabeledTrace:
    letters: tuple[int, ...]
    predicates: tuple[str, ...] = STANDARD_PREDICATES
    label: str = "unlabeled"  # positive | negative | unlabeled

    def __len__(self):
        return len(self.letters)

    def holds(self, name: str, i: int) -> bool:
        return bool(self.letters[i] >> self.predicates.index(name) & 1)

    def to_json(self) -> dict:
        return {"predicates": list(self.predicates),
                "letters": [f"{x:02x}" for x in self.letters],
                "label": self.label}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, d: dict) -> "LabeledTrace":
        names = tuple(p.split("(")[0] for p in d["predicates"])
        return cls(tuple(int(x, 16) for x in d["letters"]), names, d.get("label", "unlabeled"))


def letter_of(state, world: _World, preds: PredicateSet) -> int:
    x = state.positions["ego"]
    v = state.speeds["ego"]
    zone = world.cfg.stop_zone
    values = {
        "collision": world.collided(state),
        "ego_stopped": v <= STOPPED_SPEED,
        "in_stop_zone": any(sp - zone <= x <= sp + STOP_AREA_BEYOND for sp in world.stop_signs),
        "ped_on_road": any(state.pedestrian_on_road.values()),
        "speeding": v > preds.speed_limit,
        "braking": state.ego_braking,
    }
    letter = 0
    for i, name in enumerate(preds.names):
        if values[name]:
            letter |= 1 << i
    return letter


def abstract_trace(t: Trace, p: PredicateSet | None = None, verdict: Verdict | None = None) -> LabeledTrace:
    """Map each state of ``t`` to a letter; label positive iff the verdict passed."""
    p = p or PredicateSet.for_scenario(t.scenario)
    world = _World(t.scenario, t.config)
    letters = tuple(letter_of(st, world, p) for st in t.states)
    label = "unlabeled" if verdict is None else ("positive" if verdict.passed else "negative")
    return LabeledTrace(letters, p.names, label)


def word_of_trace(t: Trace) -> list:
    return list(t.events_applied)
