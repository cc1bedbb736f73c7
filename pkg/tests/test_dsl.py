import glob
import os

import pytest
from hypothesis import given, settings

from cpstest.dsl import (EgoSpec, ParseError, format_number, parse_scenario, serialize_scenario,
                         syntax_report, validate_scenario)
from tests.scenario_gen import scenarios

CORPUS = sorted(glob.glob(os.path.join(os.path.dirname(__file__), "data", "corpus", "*.scn")))

FULL = """
scenario full {
  environment { weather: rain; time: night; }
  road { type: intersection; markers: [solid_center, crosswalk @ 120.0];
         signs: [stop @ 80.0, speed_limit(15.0) @ 150.0]; }
  actors {
    ego { position: 0.0; speed: 10.0; controller: faulted(ignore_stop_sign, weather = rain); }
    vehicle v1 { position: 30.0; speed: 0.0; behavior: brake_at(5); }
    pedestrian p1 { crossing: 50.0; trigger: 15.0; }
  }
  oracle { longitudinal: [no_collision, stop_at_sign(0.5)]; lateral: [speed_below(20.0)]; }
}
"""


def test_parse_full_example():
    s = parse_scenario(FULL)
    assert s.environment.weather == "rain" and s.environment.time_of_day == "night"
    assert s.road.stop_signs == (80.0,)
    assert s.actors.ego.fault.kind == "ignore_stop_sign"
    assert s.actors.ego.fault.guard == ("weather", "rain")
    (v,) = s.actors.vehicles
    assert (v.behavior, v.behavior_step) == ("brake_at", 5)
    assert [c.kind for c in s.oracle.clauses] == ["no_collision", "stop_at_sign", "speed_below"]


def test_empty_blocks_take_defaults():
    s = parse_scenario("scenario e { environment {} road {} actors {} oracle {} }")
    assert s.actors.ego == EgoSpec()
    assert [c.kind for c in s.oracle.clauses] == ["no_collision"]


@pytest.mark.parametrize("path", CORPUS, ids=os.path.basename)
def test_corpus_round_trip(path):
    with open(path) as fh:
        s = parse_scenario(fh.read())
    text = serialize_scenario(s)
    assert parse_scenario(text) == s
    assert serialize_scenario(parse_scenario(text)) == text


@settings(max_examples=200, deadline=None)
@given(scenarios())
def test_generated_round_trip(s):
    assert parse_scenario(serialize_scenario(s)) == s


@pytest.mark.parametrize("x, text", [(0.0, "0.0"), (-0.0, "0.0"), (30, "30.0"), (0.1, "0.1"),
                                     (1e-7, "0.0000001"), (123.456, "123.456")])
def test_format_number(x, text):
    assert format_number(x) == text
    assert float(text) == x


@pytest.mark.parametrize("text, line, col", [
    ("scenario x { road {} }", 1, 14),
    ("scenario x {\n environment { weather: snow; } }", 2, 25),
    ("scenario x { environment {} road {} actors {} oracle {} } extra", 1, 59),
    ("scenario x { environment { weather: clear } }", 1, 43),
])
def test_parse_errors_carry_position(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_scenario(text)
    assert (info.value.line, info.value.col) == (line, col)
    report = syntax_report(info.value, text)
    assert not report.ok and report.diagnostics[0].stage == "syntax"


def test_validation_codes():
    bad = parse_scenario("""
scenario bad { environment {} road { signs: [stop @ 250.0]; } actors {
  ego { position: 10.0; speed: 50.0; controller: faulted(ignore_pedestrian, weather = snow); }
  vehicle v { position: 5.0; speed: 1.0; behavior: cruise; }
  vehicle v { position: 50.0; speed: 1.0; behavior: cruise; } }
  oracle { longitudinal: [yield_to_pedestrian(p9)]; lateral: []; } }""")
    codes = {d.code for d in validate_scenario(bad).diagnostics}
    assert codes == {"position-off-road", "speed-range", "bad-guard", "npc-behind-ego",
                     "duplicate-actor", "unknown-actor"}
    assert all(d.stage == "semantic" for d in validate_scenario(bad).diagnostics)


def test_missing_sign_and_dry_run_stage():
    s = parse_scenario("scenario m { environment {} road {} actors {} "
                       "oracle { longitudinal: [stop_at_sign(1.0)]; lateral: []; } }")
    assert [d.code for d in validate_scenario(s).diagnostics] == ["missing-sign"]
    wall = parse_scenario(open(os.path.join(os.path.dirname(__file__), "data", "corpus",
                                            "h12_stopped_lead.scn")).read())
    assert validate_scenario(wall).ok
    report = validate_scenario(wall, run_dry=True)
    assert [(d.stage, d.code) for d in report.diagnostics] == [("dry_run", "infeasible-start")]


def test_validation_json_shape():
    report = validate_scenario(parse_scenario(FULL), run_dry=True)
    assert report.to_json() == {"verdict": "valid", "diagnostics": []}
