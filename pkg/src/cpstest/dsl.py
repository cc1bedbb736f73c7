"""Scenario description language: AST, parser, canonical serializer, validator.

A scenario file has four blocks in fixed order::

    scenario stop_sign_basic {
      environment {
        weather: clear;
        time: day;
      }
      road {
        type: straight;
        markers: [solid_center, crosswalk @ 120.0];
        signs: [stop @ 80.0, speed_limit(15.0) @ 150.0];
      }
      actors {
        ego {
          position: 0.0;
          speed: 10.0;
          controller: faulted(ignore_stop_sign, weather = rain);
        }
        vehicle v1 {
          position: 30.0;
          speed: 0.0;
          behavior: brake_at(5);
        }
        pedestrian p1 {
          crossing: 50.0;
          trigger: 15.0;
        }
      }
      oracle {
        longitudinal: [no_collision, stop_at_sign(0.5)];
        lateral: [speed_below(20.0)];
      }
    }

Positions are longitudinal meters on a straight 200 m road. Empty block
bodies take defaults: clear weather, daytime, straight road with no markers
or signs, an ego at rest at 0 m driven by the rule-following controller, and
a single ``no_collision`` oracle clause. ``#`` starts a comment.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator

ROAD_LENGTH = 200.0
MAX_SPEED = 40.0

WEATHERS = ("clear", "rain", "fog")
TIMES = ("day", "night")
ROAD_TYPES = ("straight", "intersection")
MARKER_KINDS = ("solid_center", "dashed_center", "crosswalk")
SIGN_KINDS = ("stop", "speed_limit")
FAULT_KINDS = ("ignore_stop_sign", "ignore_lead_vehicle", "ignore_pedestrian")
BEHAVIORS = ("cruise", "brake_at", "cut_in_at")
CLAUSE_KINDS = ("no_collision", "stop_at_sign", "yield_to_pedestrian", "speed_below")
ENVIRONMENT_FIELDS = {"weather": WEATHERS, "time": TIMES}

BLOCK_ORDER = ("environment", "road", "actors", "oracle")


@dataclass(frozen=True)
class Span:
    line: int
    col: int
    start: int
    end: int

    def to_json(self) -> dict:
        return {"line": self.line, "col": self.col, "start": self.start, "end": self.end}


def _span() -> Span | None:
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Environment:
    weather: str = "clear"
    time_of_day: str = "day"
    span: Span | None = _span()


@dataclass(frozen=True)
class Marker:
    kind: str
    position: float | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class Sign:
    kind: str
    position: float
    limit: float | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class RoadNetwork:
    road_type: str = "straight"
    markers: tuple[Marker, ...] = ()
    signs: tuple[Sign, ...] = ()
    span: Span | None = _span()

    @property
    def stop_signs(self) -> tuple[float, ...]:
        return tuple(s.position for s in self.signs if s.kind == "stop")


@dataclass(frozen=True)
class FaultSpec:
    kind: str
    guard: tuple[str, str] | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class EgoSpec:
    start_position: float = 0.0
    start_speed: float = 0.0
    fault: FaultSpec | None = None
    span: Span | None = _span()

    @property
    def controller(self) -> str:
        return "rule_follower" if self.fault is None else "faulted"


@dataclass(frozen=True)
class VehicleSpec:
    id: str
    start_position: float
    start_speed: float = 0.0
    behavior: str = "cruise"
    behavior_step: int | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class PedestrianSpec:
    id: str
    crossing_position: float
    trigger_distance: float
    span: Span | None = _span()


@dataclass(frozen=True)
class ActorSet:
    ego: EgoSpec = EgoSpec()
    npcs: tuple[VehicleSpec | PedestrianSpec, ...] = ()
    span: Span | None = _span()

    @property
    def vehicles(self) -> tuple[VehicleSpec, ...]:
        return tuple(a for a in self.npcs if isinstance(a, VehicleSpec))

    @property
    def pedestrians(self) -> tuple[PedestrianSpec, ...]:
        return tuple(a for a in self.npcs if isinstance(a, PedestrianSpec))


@dataclass(frozen=True)
class OracleClause:
    kind: str
    param: float | str | None = None
    span: Span | None = _span()


@dataclass(frozen=True)
class OracleSpec:
    longitudinal: tuple[OracleClause, ...] = (OracleClause("no_collision"),)
    lateral: tuple[OracleClause, ...] = ()
    span: Span | None = _span()

    @property
    def clauses(self) -> tuple[OracleClause, ...]:
        return self.longitudinal + self.lateral


@dataclass(frozen=True)
class Scenario:
    name: str
    environment: Environment = Environment()
    road: RoadNetwork = RoadNetwork()
    actors: ActorSet = ActorSet()
    oracle: OracleSpec = OracleSpec()
    span: Span | None = _span()


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, expected=()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


# --------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}\[\]():;,@=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | punct | eof
    text: str
    span: Span


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, Span(line, pos - line_start + 1, pos, m.end())))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, pos - line_start + 1, pos, pos)))
    return tokens


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, expected=()) -> ParseError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return ParseError(f"{message}, found {found}", t.span.line, t.span.col, expected)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "ident") and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}", {text})
        return self.advance()

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise self.error(f"expected {what}", {what})
        return self.advance()

    def enum(self, choices, what: str) -> Token:
        t = self.tok
        if t.kind != "ident" or t.text not in choices:
            raise self.error(f"expected {what}", choices)
        return self.advance()

    def number(self) -> float:
        if self.tok.kind != "number":
            raise self.error("expected number", {"number"})
        return float(self.advance().text)

    def integer(self) -> int:
        t = self.tok
        if t.kind != "number" or not re.fullmatch(r"-?\d+", t.text):
            raise self.error("expected integer", {"integer"})
        self.advance()
        return int(t.text)

    def span_from(self, start: Token) -> Span:
        end = self.toks[self.i - 1].span.end
        return Span(start.span.line, start.span.col, start.span.start, end)

    # scenario ::= 'scenario' ident '{' environment road actors oracle '}'
    def scenario(self) -> Scenario:
        start = self.expect("scenario")
        name = self.ident("scenario name").text
        self.expect("{")
        blocks = {}
        for kw in BLOCK_ORDER:
            if not self.at(kw):
                if self.tok.kind == "ident" and self.tok.text in BLOCK_ORDER:
                    raise self.error(f"block {self.tok.text!r} out of order; expected {kw!r} block", {kw})
                raise self.error(f"expected {kw!r} block", {kw})
            blocks[kw] = getattr(self, kw)()
            if self.at(";"):
                self.advance()
        self.expect("}")
        if self.tok.kind != "eof":
            raise self.error("expected end of input", {"end of input"})
        return Scenario(name, blocks["environment"], blocks["road"], blocks["actors"],
                        blocks["oracle"], span=self.span_from(start))

    def fields(self, allowed: dict) -> dict:
        """Parse ``{ key: value; ... }`` where ``allowed`` maps key -> value parser."""
        self.expect("{")
        out = {}
        while not self.at("}"):
            key = self.tok
            if key.kind != "ident" or key.text not in allowed:
                raise self.error("expected field name or '}'", set(allowed) | {"}"})
            if key.text in out:
                raise self.error(f"duplicate field {key.text!r}")
            self.advance()
            self.expect(":")
            out[key.text] = allowed[key.text]()
            self.expect(";")
        self.expect("}")
        return out

    def listof(self, item) -> tuple:
        self.expect("[")
        items = []
        if not self.at("]"):
            items.append(item())
            while self.at(","):
                self.advance()
                items.append(item())
        self.expect("]")
        return tuple(items)

    def environment(self) -> Environment:
        start = self.expect("environment")
        f = self.fields({
            "weather": lambda: self.enum(WEATHERS, "weather").text,
            "time": lambda: self.enum(TIMES, "time of day").text,
        })
        return Environment(f.get("weather", "clear"), f.get("time", "day"), span=self.span_from(start))

    def marker(self) -> Marker:
        start = self.enum(MARKER_KINDS, "road marker")
        pos = None
        if start.text == "crosswalk":
            self.expect("@")
            pos = self.number()
        return Marker(start.text, pos, span=self.span_from(start))

    def sign(self) -> Sign:
        start = self.enum(SIGN_KINDS, "sign kind")
        limit = None
        if start.text == "speed_limit":
            self.expect("(")
            limit = self.number()
            self.expect(")")
        self.expect("@")
        return Sign(start.text, self.number(), limit, span=self.span_from(start))

    def road(self) -> RoadNetwork:
        start = self.expect("road")
        f = self.fields({
            "type": lambda: self.enum(ROAD_TYPES, "road type").text,
            "markers": lambda: self.listof(self.marker),
            "signs": lambda: self.listof(self.sign),
        })
        return RoadNetwork(f.get("type", "straight"), f.get("markers", ()), f.get("signs", ()),
                           span=self.span_from(start))

    def controller(self) -> FaultSpec | None:
        start = self.enum(("rule_follower", "faulted"), "controller")
        if start.text == "rule_follower":
            return None
        self.expect("(")
        kind = self.enum(FAULT_KINDS, "fault kind").text
        guard = None
        if self.at(","):
            self.advance()
            key = self.ident("guard field").text
            self.expect("=")
            guard = (key, self.ident("guard value").text)
        self.expect(")")
        return FaultSpec(kind, guard, span=self.span_from(start))

    def behavior(self) -> tuple[str, int | None]:
        kind = self.enum(BEHAVIORS, "behavior").text
        if kind == "cruise":
            return kind, None
        self.expect("(")
        step = self.integer()
        self.expect(")")
        return kind, step

    def actors(self) -> ActorSet:
        start = self.expect("actors")
        self.expect("{")
        ego = None
        npcs = []
        while not self.at("}"):
            t = self.tok
            if t.kind == "ident" and t.text == "ego":
                if ego is not None or npcs:
                    raise self.error("ego must be declared once, before npc actors")
                self.advance()
                f = self.fields({"position": self.number, "speed": self.number,
                                 "controller": self.controller})
                ego = EgoSpec(f.get("position", 0.0), f.get("speed", 0.0), f.get("controller"),
                              span=self.span_from(t))
            elif t.kind == "ident" and t.text == "vehicle":
                self.advance()
                ident = self.ident("actor id").text
                f = self.fields({"position": self.number, "speed": self.number,
                                 "behavior": self.behavior})
                if "position" not in f:
                    raise self.error(f"vehicle {ident!r} requires a position field")
                kind, step = f.get("behavior", ("cruise", None))
                npcs.append(VehicleSpec(ident, f["position"], f.get("speed", 0.0), kind, step,
                                        span=self.span_from(t)))
            elif t.kind == "ident" and t.text == "pedestrian":
                self.advance()
                ident = self.ident("actor id").text
                f = self.fields({"crossing": self.number, "trigger": self.number})
                if "crossing" not in f or "trigger" not in f:
                    raise self.error(f"pedestrian {ident!r} requires crossing and trigger fields")
                npcs.append(PedestrianSpec(ident, f["crossing"], f["trigger"], span=self.span_from(t)))
            else:
                raise self.error("expected actor declaration or '}'", {"ego", "vehicle", "pedestrian", "}"})
        self.expect("}")
        return ActorSet(ego or EgoSpec(), tuple(npcs), span=self.span_from(start))

    def clause(self) -> OracleClause:
        start = self.enum(CLAUSE_KINDS, "oracle clause")
        kind = start.text
        param = None
        if kind in ("stop_at_sign", "speed_below"):
            self.expect("(")
            param = self.number()
            self.expect(")")
        elif kind == "yield_to_pedestrian" and self.at("("):
            self.advance()
            param = self.ident("pedestrian id").text
            self.expect(")")
        return OracleClause(kind, param, span=self.span_from(start))

    def oracle(self) -> OracleSpec:
        start = self.expect("oracle")
        f = self.fields({
            "longitudinal": lambda: self.listof(self.clause),
            "lateral": lambda: self.listof(self.clause),
        })
        if not f:
            return OracleSpec(span=self.span_from(start))
        return OracleSpec(f.get("longitudinal", ()), f.get("lateral", ()), span=self.span_from(start))


def parse_scenario(text: str) -> Scenario:
    """Parse scenario text; raises ParseError with line/column and expected tokens."""
    return _Parser(text).scenario()


# --------------------------------------------------------------------------
# serializer


def format_number(x: float) -> str:
    """Shortest round-tripping decimal, fixed-point, at least one fractional digit."""
    s = format(Decimal(repr(float(x))), "f")
    if "." not in s:
        s += ".0"
    if s == "-0.0":
        s = "0.0"
    return s


def _clause_text(c: OracleClause) -> str:
    if c.param is None:
        return c.kind
    if isinstance(c.param, str):
        return f"{c.kind}({c.param})"
    return f"{c.kind}({format_number(c.param)})"


def _list(items) -> str:
    return "[" + ", ".join(items) + "]"


def serialize_scenario(s: Scenario) -> str:
    n = format_number
    out = [f"scenario {s.name} {{"]
    env = s.environment
    out += ["  environment {", f"    weather: {env.weather};", f"    time: {env.time_of_day};", "  }"]

    road = s.road
    markers = [m.kind if m.position is None else f"{m.kind} @ {n(m.position)}" for m in road.markers]
    signs = [f"stop @ {n(g.position)}" if g.kind == "stop"
             else f"speed_limit({n(g.limit)}) @ {n(g.position)}" for g in road.signs]
    out += ["  road {", f"    type: {road.road_type};", f"    markers: {_list(markers)};",
            f"    signs: {_list(signs)};", "  }"]

    ego = s.actors.ego
    if ego.fault is None:
        ctrl = "rule_follower"
    elif ego.fault.guard is None:
        ctrl = f"faulted({ego.fault.kind})"
    else:
        ctrl = f"faulted({ego.fault.kind}, {ego.fault.guard[0]} = {ego.fault.guard[1]})"
    out += ["  actors {", "    ego {", f"      position: {n(ego.start_position)};",
            f"      speed: {n(ego.start_speed)};", f"      controller: {ctrl};", "    }"]
    for a in s.actors.npcs:
        if isinstance(a, VehicleSpec):
            beh = a.behavior if a.behavior == "cruise" else f"{a.behavior}({a.behavior_step})"
            out += [f"    vehicle {a.id} {{", f"      position: {n(a.start_position)};",
                    f"      speed: {n(a.start_speed)};", f"      behavior: {beh};", "    }"]
        else:
            out += [f"    pedestrian {a.id} {{", f"      crossing: {n(a.crossing_position)};",
                    f"      trigger: {n(a.trigger_distance)};", "    }"]
    out += ["  }"]

    o = s.oracle
    out += ["  oracle {", f"    longitudinal: {_list(map(_clause_text, o.longitudinal))};",
            f"    lateral: {_list(map(_clause_text, o.lateral))};", "  }", "}"]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Diagnostic:
    stage: str  # syntax | semantic | dry_run
    code: str
    message: str
    span: Span | None = None
    severity: str = "error"

    def to_json(self) -> dict:
        return {"stage": self.stage, "code": self.code, "severity": self.severity,
                "message": self.message, "span": self.span.to_json() if self.span else None}


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def verdict(self) -> str:
        return "invalid" if any(d.severity == "error" for d in self.diagnostics) else "valid"

    @property
    def ok(self) -> bool:
        return self.verdict == "valid"

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "diagnostics": [d.to_json() for d in self.diagnostics]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def syntax_report(err: ParseError, text: str) -> ValidationReport:
    """Wrap a ParseError as a single syntax-stage diagnostic."""
    lines = text.split("\n")
    start = sum(len(l) + 1 for l in lines[: err.line - 1]) + err.col - 1
    start = max(0, min(start, len(text)))
    span = Span(err.line, err.col, start, start)
    return ValidationReport((Diagnostic("syntax", "parse-error", str(err), span),))


def _semantic(s: Scenario) -> Iterator[Diagnostic]:
    def diag(code, message, node=None):
        span = getattr(node, "span", None) or s.span
        return Diagnostic("semantic", code, message, span)

    def on_road(x):
        return 0.0 <= x <= ROAD_LENGTH

    road = s.road
    for m in road.markers:
        if m.position is not None and not on_road(m.position):
            yield diag("position-off-road", f"marker {m.kind} at {m.position} m lies outside the road", m)
    for g in road.signs:
        if not on_road(g.position):
            yield diag("position-off-road", f"{g.kind} sign at {g.position} m lies outside the road", g)
        if g.kind == "speed_limit" and not (g.limit > 0):
            yield diag("bad-parameter", "speed limit must be positive", g)
    for a, b in zip(road.signs, road.signs[1:]):
        if not b.position > a.position:
            yield diag("sign-order", "sign positions must be strictly increasing", b)

    ego = s.actors.ego
    if not on_road(ego.start_position):
        yield diag("position-off-road", "ego start position lies outside the road", ego)
    if not 0.0 <= ego.start_speed <= MAX_SPEED:
        yield diag("speed-range", f"ego speed must lie in [0, {MAX_SPEED}] m/s", ego)
    if ego.fault is not None and ego.fault.guard is not None:
        key, value = ego.fault.guard
        if key not in ENVIRONMENT_FIELDS:
            yield diag("bad-guard", f"fault guard may only reference environment fields, not {key!r}", ego.fault)
        elif value not in ENVIRONMENT_FIELDS[key]:
            yield diag("bad-guard", f"fault guard value {value!r} is not a valid {key}", ego.fault)

    seen = set()
    for a in s.actors.npcs:
        if a.id in seen or a.id == "ego":
            yield diag("duplicate-actor", f"actor id {a.id!r} declared more than once", a)
        seen.add(a.id)
        if isinstance(a, VehicleSpec):
            if not on_road(a.start_position):
                yield diag("position-off-road", f"vehicle {a.id!r} starts outside the road", a)
            if not a.start_position > ego.start_position:
                yield diag("npc-behind-ego",
                           f"vehicle {a.id!r} must start ahead of ego (ordering invariant)", a)
            if not 0.0 <= a.start_speed <= MAX_SPEED:
                yield diag("speed-range", f"vehicle {a.id!r} speed must lie in [0, {MAX_SPEED}] m/s", a)
            if a.behavior_step is not None and a.behavior_step < 0:
                yield diag("bad-parameter", f"vehicle {a.id!r} behavior step must be >= 0", a)
        else:
            if not on_road(a.crossing_position):
                yield diag("position-off-road", f"pedestrian {a.id!r} crosses outside the road", a)
            if not a.trigger_distance > 0:
                yield diag("bad-parameter", f"pedestrian {a.id!r} trigger distance must be > 0", a)

    oracle = s.oracle
    if not oracle.clauses:
        yield diag("empty-oracle", "oracle has no clauses", oracle)
    peds = {p.id for p in s.actors.pedestrians}
    for c in oracle.clauses:
        if c.kind == "stop_at_sign":
            if not road.stop_signs:
                yield diag("missing-sign", "oracle references missing sign", c)
            if c.param < 0:
                yield diag("bad-parameter", "stop_at_sign overshoot must be >= 0", c)
        elif c.kind == "speed_below" and not c.param > 0:
            yield diag("bad-parameter", "speed_below threshold must be positive", c)
        elif c.kind == "yield_to_pedestrian" and c.param is not None and c.param not in peds:
            yield diag("unknown-actor", f"oracle references undeclared actor {c.param!r}", c)


def validate_scenario(s: Scenario, run_dry: bool = False, cfg=None) -> ValidationReport:
    """Semantic checks, then optionally a short simulator dry run. Never raises."""
    diags = list(_semantic(s))
    if run_dry and not diags:
        from . import simulator

        for code, message in simulator.dry_run(s, cfg or simulator.SimConfig()):
            diags.append(Diagnostic("dry_run", code, message, s.span))
    return ValidationReport(tuple(diags))


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
