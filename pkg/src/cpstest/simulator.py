"""Deterministic 1-D longitudinal traffic simulator used as the test oracle.

All actors live on one straight lane; positions are meters along the road,
speeds m/s. The ego never accelerates: it either holds speed or brakes.

Ego controller (rule follower). Let ``a_w`` be the comfortable deceleration
for the current weather (halved in rain) and ``d`` the distance to the
nearest obstacle ahead (stop sign, in-lane vehicle, pedestrian on the road).
The ego brakes when the obstacle would be inside its braking envelope after
one more step at the current speed::

    d - v*dt <= v**2 / (2*a_w) + stop_zone

It brakes at ``a_w`` unless the obstacle is already closer than that
envelope (weather turned to rain), in which case it brakes just hard enough,
up to the dry comfortable deceleration. Kinematics are semi-implicit Euler::

    v' = max(0, v - a*dt);  x' = x + v'*dt

Together these keep ``d > v**2/(2*a) + stop_zone`` invariant, so a rule
follower that starts outside every braking envelope never collides and always
halts before a stop sign. A faulted controller drops one obstacle class from
``d`` while its guard (if any) matches the current environment.

Pedestrians step onto the road on ``PED_CROSS`` only while the ego is within
their trigger distance and still able to stop for them; once on the road they
stay. Vehicles with ``cut_in_at(k)`` drive in the adjacent lane until step
``k`` and merge at the first later step that leaves the ego room to stop.
NPC vehicles ignore each other; only ego gaps count as collisions.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field

from .dsl import PedestrianSpec, Scenario, VehicleSpec


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    max_steps: int = 300
    comfortable_decel: float = 4.0
    collision_gap: float = 0.5
    stop_zone: float = 2.0
    npc_decel: float = 6.0
    rain_decel_factor: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        for name in ("comfortable_decel", "collision_gap", "stop_zone", "npc_decel", "rain_decel_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def decel_for(self, weather: str) -> float:
        return self.comfortable_decel * (self.rain_decel_factor if weather == "rain" else 1.0)


class InvalidEvent(ValueError):
    pass


EVENT_KINDS = ("NONE", "NPC_BRAKE", "PED_CROSS", "RAIN_ON", "RAIN_OFF")
_EVENT_RE = re.compile(r"^\s*([A-Z_]+)\s*(?:\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*\))?\s*$")


@dataclass(frozen=True, order=True)
class Event:
    kind: str
    target: str | None = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise InvalidEvent(f"unknown event kind {self.kind!r}")
        if (self.kind in ("NPC_BRAKE", "PED_CROSS")) != (self.target is not None):
            raise InvalidEvent(f"event {self.kind} has wrong arity")

    def __str__(self):
        return self.kind if self.target is None else f"{self.kind}({self.target})"

    @classmethod
    def parse(cls, text: str) -> "Event":
        m = _EVENT_RE.match(text)
        if not m:
            raise InvalidEvent(f"cannot parse event {text!r}")
        return cls(m.group(1), m.group(2))


NONE = Event("NONE")
RAIN_ON = Event("RAIN_ON")
RAIN_OFF = Event("RAIN_OFF")


def parse_word(text: str) -> tuple[Event, ...]:
    """Comma-separated events, e.g. ``NONE,NPC_BRAKE(v1),RAIN_ON``."""
    return tuple(Event.parse(t) for t in re.findall(r"[A-Z_]+(?:\([^)]*\))?", text))


def scenario_alphabet(s: Scenario, weather_events: bool = True) -> tuple[Event, ...]:
    events = [NONE]
    events += [Event("NPC_BRAKE", v.id) for v in s.actors.vehicles]
    events += [Event("PED_CROSS", p.id) for p in s.actors.pedestrians]
    if weather_events:
        events += [RAIN_ON, RAIN_OFF]
    return tuple(events)


@dataclass(slots=True)
class SimState:
    step: int
    positions: dict[str, float]
    speeds: dict[str, float]
    weather: str
    pedestrian_on_road: dict[str, bool]
    ego_braking: bool = False
    in_lane: dict[str, bool] = field(default_factory=dict)
    npc_braking: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "positions": self.positions,
            "speeds": self.speeds,
            "weather": self.weather,
            "pedestrian_on_road": self.pedestrian_on_road,
            "ego_braking": self.ego_braking,
            "in_lane": self.in_lane,
            "npc_braking": self.npc_braking,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SimState":
        return cls(d["step"], dict(d["positions"]), dict(d["speeds"]), d["weather"],
                   dict(d["pedestrian_on_road"]), d["ego_braking"], dict(d.get("in_lane", {})),
                   dict(d.get("npc_braking", {})))


@dataclass
class Trace:
    scenario: Scenario
    states: list[SimState]
    events_applied: list[Event]
    config: SimConfig = SimConfig()

    @property
    def scenario_ref(self) -> str:
        return self.scenario.name

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario.name,
            "dt": self.config.dt,
            "states": [s.to_json() for s in self.states],
            "events": [str(e) for e in self.events_applied],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


@dataclass(frozen=True)
class Verdict:
    violated_clauses: tuple = ()  # ((OracleClause, first_violation_step), ...)

    @property
    def outcome(self) -> str:
        return "fail" if self.violated_clauses else "pass"

    @property
    def passed(self) -> bool:
        return not self.violated_clauses

    def to_json(self) -> dict:
        from .dsl import _clause_text

        return {"outcome": self.outcome,
                "violated_clauses": [{"clause": _clause_text(c), "step": k} for c, k in self.violated_clauses]}


def initial_state(s: Scenario) -> SimState:
    ego = s.actors.ego
    positions = {"ego": ego.start_position}
    speeds = {"ego": ego.start_speed}
    in_lane, braking = {}, {}
    for v in s.actors.vehicles:
        positions[v.id] = v.start_position
        speeds[v.id] = v.start_speed
        in_lane[v.id] = v.behavior != "cut_in_at"
        braking[v.id] = False
    peds = {p.id: False for p in s.actors.pedestrians}
    return SimState(0, positions, speeds, s.environment.weather, peds, False, in_lane, braking)


class _World:
    """Static per-scenario data, precomputed once per run."""

    def __init__(self, s: Scenario, cfg: SimConfig):
        self.s = s
        self.cfg = cfg
        self.stop_signs = s.road.stop_signs
        self.limits = tuple((g.position, g.limit) for g in s.road.signs if g.kind == "speed_limit")
        self.vehicles = {v.id: v for v in s.actors.vehicles}
        self.peds = {p.id: p for p in s.actors.pedestrians}
        fault = s.actors.ego.fault
        self.fault = fault.kind if fault else None
        self.guard = fault.guard if fault else None

    def check_event(self, e: Event):
        if e.kind == "NPC_BRAKE" and e.target not in self.vehicles:
            raise InvalidEvent(f"NPC_BRAKE references unknown vehicle {e.target!r}")
        if e.kind == "PED_CROSS" and e.target not in self.peds:
            raise InvalidEvent(f"PED_CROSS references unknown pedestrian {e.target!r}")

    def ignored(self, weather: str) -> str | None:
        if self.fault is None:
            return None
        if self.guard is not None:
            key, value = self.guard
            current = weather if key == "weather" else self.s.environment.time_of_day
            if current != value:
                return None
        return self.fault

    def obstacle_distance(self, st: SimState, ignore: str | None) -> float:
        x = st.positions["ego"]
        d = math.inf
        if ignore != "ignore_stop_sign":
            for sp in self.stop_signs:
                if sp >= x and sp - x < d:
                    d = sp - x
        if ignore != "ignore_lead_vehicle":
            for vid in self.vehicles:
                if st.in_lane[vid]:
                    g = st.positions[vid] - x
                    if 0.0 <= g < d:
                        d = g
        if ignore != "ignore_pedestrian":
            for pid, p in self.peds.items():
                if st.pedestrian_on_road[pid]:
                    g = p.crossing_position - x
                    if 0.0 <= g < d:
                        d = g
        return d

    def envelope(self, v: float, weather: str) -> float:
        return v * v / (2.0 * self.cfg.decel_for(weather)) + self.cfg.stop_zone

    def gaps(self, st: SimState):
        x = st.positions["ego"]
        for vid in self.vehicles:
            if st.in_lane[vid]:
                yield st.positions[vid] - x
        for pid, p in self.peds.items():
            if st.pedestrian_on_road[pid]:
                yield p.crossing_position - x

    def collided(self, st: SimState) -> bool:
        return any(g < self.cfg.collision_gap for g in self.gaps(st))

    def step(self, st: SimState, e: Event) -> SimState:
        cfg = self.cfg
        dt = cfg.dt
        weather = st.weather
        pos = dict(st.positions)
        spd = dict(st.speeds)
        peds = dict(st.pedestrian_on_road)
        in_lane = dict(st.in_lane)
        nbrake = dict(st.npc_braking)
        x, v = pos["ego"], spd["ego"]

        # event side effects
        if e.kind == "NPC_BRAKE":
            nbrake[e.target] = True
        elif e.kind == "PED_CROSS":
            g = self.peds[e.target].crossing_position - x
            if self.envelope(v, weather) < g <= self.peds[e.target].trigger_distance:
                peds[e.target] = True
        elif e.kind == "RAIN_ON":
            weather = "rain"
        elif e.kind == "RAIN_OFF":
            weather = "clear"
        for vid, spec in self.vehicles.items():
            if spec.behavior == "brake_at" and st.step >= spec.behavior_step:
                nbrake[vid] = True
            elif spec.behavior == "cut_in_at" and not in_lane[vid] and st.step >= spec.behavior_step:
                g = pos[vid] - x
                if g > self.envelope(v, weather):
                    in_lane[vid] = True

        # ego controller
        view = SimState(st.step, pos, spd, weather, peds, False, in_lane, nbrake)
        a = 0.0
        if v > 0.0:
            a_w = cfg.decel_for(weather)
            d = self.obstacle_distance(view, self.ignored(weather))
            if d - v * dt <= v * v / (2.0 * a_w) + cfg.stop_zone:
                needed = v * v / (2.0 * (d - cfg.stop_zone)) * 1.05 if d > cfg.stop_zone else math.inf
                a = min(cfg.comfortable_decel, max(a_w, needed))
            else:
                for sp, limit in self.limits:
                    if x >= sp and v > limit:
                        a = a_w
        braking = a > 0.0

        # kinematics, semi-implicit Euler
        v = max(0.0, v - a * dt)
        pos["ego"] = x + v * dt
        spd["ego"] = v
        for vid in self.vehicles:
            u = spd[vid]
            if nbrake[vid]:
                u = max(0.0, u - cfg.npc_decel * dt)
            spd[vid] = u
            pos[vid] = pos[vid] + u * dt
        return SimState(st.step + 1, pos, spd, weather, peds, braking, in_lane, nbrake)


def step(state: SimState, event: Event, s: Scenario, cfg: SimConfig = SimConfig()) -> SimState:
    """Advance one time step. Pure: the input state is not modified."""
    w = _World(s, cfg)
    w.check_event(event)
    return w.step(state, event)


def run(s: Scenario, word=(), cfg: SimConfig = SimConfig()) -> tuple[Trace, Verdict]:
    """Execute ``s`` under the event word (padded with NONE to ``cfg.max_steps``).

    Halts right after the first collision state.
    """
    word = tuple(word)
    if len(word) > cfg.max_steps:
        raise ValueError(f"word longer than max_steps ({len(word)} > {cfg.max_steps})")
    w = _World(s, cfg)
    for e in word:
        w.check_event(e)
    st = initial_state(s)
    states = [st]
    applied = []
    if not w.collided(st):
        for k in range(cfg.max_steps):
            e = word[k] if k < len(word) else NONE
            st = w.step(st, e)
            states.append(st)
            applied.append(e)
            if w.collided(st):
                break
    trace = Trace(s, states, applied, cfg)
    return trace, evaluate_oracles(trace, s.oracle, cfg)


def evaluate_oracles(t: Trace, o, cfg: SimConfig = SimConfig()) -> Verdict:
    w = _World(t.scenario, cfg)
    states = t.states
    xs = [st.positions["ego"] for st in states]
    vs = [st.speeds["ego"] for st in states]
    violated = []
    for clause in o.clauses:
        k = None
        if clause.kind == "no_collision":
            k = next((i for i, st in enumerate(states) if w.collided(st)), None)
        elif clause.kind == "speed_below":
            k = next((i for i, v in enumerate(vs) if v > clause.param), None)
        elif clause.kind == "stop_at_sign":
            k = _stop_sign_violation(xs, vs, w.stop_signs, clause.param, cfg.stop_zone)
        elif clause.kind == "yield_to_pedestrian":
            for p in w.peds.values():
                if clause.param is not None and p.id != clause.param:
                    continue
                kp = next((i for i, st in enumerate(states)
                           if st.pedestrian_on_road[p.id] and xs[i] >= p.crossing_position), None)
                if kp is not None and (k is None or kp < k):
                    k = kp
        if k is not None:
            violated.append((clause, k))
    return Verdict(tuple(violated))


def _stop_sign_violation(xs, vs, signs, overshoot, stop_zone):
    first = None
    for sp in signs:
        stopped = False
        for i in range(len(xs)):
            if vs[i] <= 0.1 and -overshoot <= sp - xs[i] <= stop_zone:
                stopped = True
            if i > 0 and xs[i - 1] <= sp + overshoot < xs[i] and vs[i] > 0.1 and not stopped:
                if first is None or i < first:
                    first = i
                break
    return first


def dry_run(s: Scenario, cfg: SimConfig = SimConfig()) -> list[tuple[str, str]]:
    """Simulator-level checks: every obstacle starts outside the ego's braking
    envelope, and 10 steps under the empty word execute cleanly."""
    problems = []
    w = _World(s, cfg)
    st = initial_state(s)
    x, v = st.positions["ego"], st.speeds["ego"]
    env = w.envelope(v, st.weather)
    for sp in w.stop_signs:
        if 0.0 <= sp - x <= env:
            problems.append(("infeasible-start",
                             f"ego starts inside the braking envelope of the stop sign at {sp} m"))
    for vid, spec in w.vehicles.items():
        if st.in_lane[vid] and st.positions[vid] - x <= env:
            problems.append(("infeasible-start",
                             f"ego starts inside the braking envelope of vehicle {vid!r}"))
    try:
        run(s, (), dataclasses.replace(cfg, max_steps=10))
    except Exception as exc:  # pragma: no cover - defensive
        problems.append(("simulator-error", f"dry run failed: {exc}"))
    return problems
