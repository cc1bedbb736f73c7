"""INI configuration: defaults < config file < command-line flags.

Sections mirror the tool stages. Unknown sections or keys are errors, so a
typo never silently falls back to a default.
"""
from __future__ import annotations

import configparser
import copy
import dataclasses

from .fuzzer import OPERATORS, FuzzConfig
from .simulator import SimConfig

DEFAULTS: dict[str, dict] = {
    "simulator": {f.name: f.default for f in dataclasses.fields(SimConfig)},
    "lstar": {"eq_budget": 1000, "max_rounds": 50, "max_len": 8, "rng_seed": 0,
              "weather_events": True, "cache": ""},
    "sat": {"max_size": 6},
    "fuzz": {"budget": 10_000, "rng_seed": 0, "traversal": "bfs", "stop_on_first": False,
             "batch_size": 16, "workers": 1, "weights": ",".join(f"{op}:1" for op in OPERATORS)},
    "llm": {"provider": "mock", "script": "", "count": 5, "max_repair_rounds": 3},
}


class ConfigError(ValueError):
    pass


def _coerce(section: str, key: str, raw, default):
    try:
        if isinstance(default, bool):
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {type(default).__name__}") from None


def load_config(path: str | None = None, overrides: dict | None = None) -> dict:
    """Resolved config as {section: {key: value}}; ``overrides`` uses the same shape."""
    cfg = copy.deepcopy(DEFAULTS)
    layers = []
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        layers.append({s: dict(parser[s]) for s in parser.sections()})
    if overrides:
        layers.append(overrides)
    for layer in layers:
        for section, values in layer.items():
            if section not in cfg:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in values.items():
                if key not in cfg[section]:
                    raise ConfigError(f"unknown config key [{section}] {key}")
                cfg[section][key] = _coerce(section, key, raw, DEFAULTS[section][key])
    sim_config(cfg)
    fuzz_config(cfg)
    return cfg


def sim_config(cfg: dict) -> SimConfig:
    try:
        return SimConfig(**cfg["simulator"])
    except ValueError as exc:
        raise ConfigError(f"[simulator] {exc}") from None


def parse_weights(text: str) -> tuple[tuple[str, float], ...]:
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        op, _, w = part.partition(":")
        try:
            out.append((op.strip(), float(w)))
        except ValueError:
            raise ConfigError(f"[fuzz] weights: bad entry {part!r}") from None
    return tuple(out)


def fuzz_config(cfg: dict) -> FuzzConfig:
    f = cfg["fuzz"]
    try:
        return FuzzConfig(budget_execs=f["budget"], rng_seed=f["rng_seed"], traversal=f["traversal"],
                          weights=parse_weights(f["weights"]), stop_on_first=f["stop_on_first"],
                          batch_size=f["batch_size"], workers=f["workers"], sim=sim_config(cfg))
    except ValueError as exc:
        raise ConfigError(f"[fuzz] {exc}") from None
