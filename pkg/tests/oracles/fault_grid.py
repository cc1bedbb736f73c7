"""Exhaustive small-grid search over the three fault families.

Each family is a scenario template parametrized by ego speed and obstacle
gap. Starts that fail the dry run are skipped. Every event word up to the
given length is executed and judged by the scenario's own oracle clauses.
"""
from __future__ import annotations

import itertools

from cpstest.dsl import parse_scenario
from cpstest.simulator import SimConfig, dry_run, run, scenario_alphabet

SPEEDS = (10.0, 20.0, 30.0)
GAPS = (10.0, 30.0, 60.0)

_TEMPLATES = {
    "ignore_lead_vehicle": """scenario lead_{tag} {{
  environment {{ weather: clear; time: day; }}
  road {{ type: straight; markers: []; signs: []; }}
  actors {{
    ego {{ position: 0.0; speed: {v}; controller: {ctrl}; }}
    vehicle lead {{ position: {g}; speed: {v}; behavior: cruise; }}
  }}
  oracle {{ longitudinal: [no_collision]; lateral: []; }}
}}""",
    "ignore_pedestrian": """scenario ped_{tag} {{
  environment {{ weather: clear; time: day; }}
  road {{ type: straight; markers: [crosswalk @ {g}]; signs: []; }}
  actors {{
    ego {{ position: 0.0; speed: {v}; controller: {ctrl}; }}
    pedestrian p1 {{ crossing: {g}; trigger: {trig}; }}
  }}
  oracle {{ longitudinal: [no_collision]; lateral: [yield_to_pedestrian(p1)]; }}
}}""",
    "ignore_stop_sign": """scenario stop_{tag} {{
  environment {{ weather: clear; time: day; }}
  road {{ type: intersection; markers: []; signs: [stop @ {g}]; }}
  actors {{
    ego {{ position: 0.0; speed: {v}; controller: {ctrl}; }}
  }}
  oracle {{ longitudinal: [stop_at_sign(1.0)]; lateral: []; }}
}}""",
}

FAMILIES = tuple(_TEMPLATES)


def family_scenario(kind: str, speed: float, gap: float, faulted: bool):
    ctrl = f"faulted({kind})" if faulted else "rule_follower"
    text = _TEMPLATES[kind].format(tag="f" if faulted else "c", v=speed, g=gap,
                                   trig=gap + 10.0, ctrl=ctrl)
    return parse_scenario(text)


def words(alphabet, max_len: int):
    for n in range(max_len + 1):
        yield from itertools.product(alphabet, repeat=n)


def search(kind: str, faulted: bool, max_len: int, cfg: SimConfig, first_only: bool = True):
    """Violating (speed, gap, word) triples found on the grid, and the number of runs."""
    found = []
    runs = 0
    for speed in SPEEDS:
        for gap in GAPS:
            s = family_scenario(kind, speed, gap, faulted)
            if dry_run(s, cfg):
                continue
            for w in words(scenario_alphabet(s), max_len):
                runs += 1
                _, verdict = run(s, w, cfg)
                if not verdict.passed:
                    found.append((speed, gap, w))
                    if first_only:
                        return found, runs
    return found, runs
