"""Command-line entry point: ``cpstest <command> ...``.

Exit codes: 0 clean, 2 violations found (counterexamples, failing verdicts),
1 operational error. Every JSON artifact carries the tool version, the
resolved configuration and the RNG seeds used.
"""
from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from pathlib import Path

from . import __version__
from .abstraction import LabeledTrace, PredicateSet, abstract_trace
from .automata import DFA
from .config import ConfigError, fuzz_config, load_config, sim_config
from .dsl import ParseError, load_scenario, parse_scenario, serialize_scenario, syntax_report, validate_scenario
from .fuzzer import FuzzInput, fuzz
from .llm import GenerationJob, HttpProvider, MockProvider, ProviderError, generate_scenarios
from .lstar import BudgetExhausted, MembershipCache, SimulatorTeacher, TeacherError, learn_run, sample_length
from .ltl import FormulaSyntaxError, eval_ltlf, formula_from_json, load_formula
from .ltl_learn import NoSeparator, TraceSample, learn_minimal
from .monitor import MonitorAutomaton, monitor_run, reachable_state_bound
from .simulator import Event, parse_word, run, scenario_alphabet

log = logging.getLogger("cpstest")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(message)


def envelope(cfg: dict, seeds: dict, **payload) -> dict:
    return {"tool": "cpstest", "version": __version__, "config": cfg, "seeds": seeds, **payload}


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def emit(args, obj):
    if args.out:
        write_json(args.out, obj)
    elif not args.quiet:
        print(json.dumps(obj, indent=1, sort_keys=True))


def _scenario_files(path) -> list[Path]:
    p = Path(path)
    return sorted(p.glob("*.scn")) if p.is_dir() else [p]


# --------------------------------------------------------------------------
# commands


def cmd_parse(args, cfg):
    text = Path(args.file).read_text(encoding="utf-8")
    try:
        s = parse_scenario(text)
    except ParseError as err:
        print(syntax_report(err, text).dumps(), file=sys.stderr)
        return EXIT_ERROR
    out = serialize_scenario(s)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    elif not args.quiet:
        print(out, end="")
    return EXIT_OK


def cmd_validate(args, cfg):
    text = Path(args.file).read_text(encoding="utf-8")
    try:
        report = validate_scenario(parse_scenario(text), args.dry_run, sim_config(cfg))
    except ParseError as err:
        report = syntax_report(err, text)
    emit(args, report.to_json())
    return EXIT_OK if report.ok else EXIT_ERROR


def cmd_simulate(args, cfg):
    s = load_scenario(args.file)
    sim = sim_config(cfg)
    trace, verdict = run(s, parse_word(args.word or ""), sim)
    labeled = abstract_trace(trace, PredicateSet.for_scenario(s), verdict)
    emit(args, envelope(cfg, {}, trace=trace.to_json(), verdict=verdict.to_json(), labeled=labeled.to_json()))
    return EXIT_OK if verdict.passed else EXIT_VIOLATION


def _provider(cfg, args):
    kind = getattr(args, "provider", None) or cfg["llm"]["provider"]
    script = getattr(args, "script", None) or cfg["llm"]["script"]
    if kind == "mock":
        if not script:
            raise ConfigError("mock provider needs a reply script (--script or [llm] script)")
        return MockProvider.from_file(script)
    if kind == "http":
        return HttpProvider.from_env()
    raise ConfigError(f"unknown provider {kind!r}")


def _generate(rules_file, out_dir: Path, cfg, args, count=None) -> tuple[list, dict]:
    job = GenerationJob(Path(rules_file).read_text(encoding="utf-8"),
                        count or cfg["llm"]["count"], cfg["llm"]["max_repair_rounds"])
    result = generate_scenarios(job, _provider(cfg, args), sim_config(cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = []
    for a in result.accepted:
        (out_dir / f"{a.candidate:03d}_{a.scenario.name}.scn").write_text(
            serialize_scenario(a.scenario), encoding="utf-8")
        scenarios.append(a.scenario)
    write_json(out_dir / "generation.json", envelope(cfg, {}, **result.to_json()))
    if result.aborted:
        raise StageError("generate", f"provider failed: {result.aborted}")
    return scenarios, result.to_json()


def cmd_gen(args, cfg):
    out = Path(args.out or "seeds")
    scenarios, res = _generate(args.rules, out, cfg, args, args.n)
    if not args.quiet:
        print(f"accepted {len(res['accepted'])}, rejected {len(res['rejected'])} -> {out}")
    return EXIT_OK


def _learn_dfa(s, alphabet, cfg, cache_path=None):
    lcfg = cfg["lstar"]
    teacher = SimulatorTeacher(s, sim_config(cfg), lcfg["max_len"], lcfg["rng_seed"])
    cache = MembershipCache(teacher, cache_path or lcfg["cache"] or None)
    try:
        result = learn_run(cache, alphabet, lcfg["eq_budget"], lcfg["max_rounds"])
    finally:
        cache.save()
    return result, cache


def cmd_learn_dfa(args, cfg):
    s = load_scenario(args.file)
    if args.eq_budget is not None:
        cfg["lstar"]["eq_budget"] = args.eq_budget
    alphabet = parse_word(args.alphabet) if args.alphabet else \
        scenario_alphabet(s, cfg["lstar"]["weather_events"])
    result, cache = _learn_dfa(s, alphabet, cfg, args.cache)
    emit(args, envelope(cfg, {"lstar": cfg["lstar"]["rng_seed"]}, scenario=s.name,
                        dfa=result.hypothesis.to_json(), hypothesis_sizes=result.history,
                        counterexamples=[[str(e) for e in w] for w in result.counterexamples],
                        membership_queries=cache.queries))
    return EXIT_OK


def _load_traces(paths, label=None) -> list[LabeledTrace]:
    traces = []
    for p in paths:
        files = sorted(Path(p).glob("*.json")) if Path(p).is_dir() else [Path(p)]
        for f in files:
            d = json.loads(f.read_text(encoding="utf-8"))
            t = LabeledTrace.from_json(d.get("labeled", d))
            traces.append(t if label is None else LabeledTrace(t.letters, t.predicates, label))
    return traces


def _destutter(t: LabeledTrace) -> LabeledTrace:
    letters = [x for k, x in enumerate(t.letters) if k == 0 or x != t.letters[k - 1]]
    return LabeledTrace(tuple(letters), t.predicates, t.label)


def learn_formula(traces, max_size: int):
    """Learn from labeled traces with stuttering collapsed; also report whether
    the formula separates the original, uncollapsed traces."""
    pos = {_destutter(t) for t in traces if t.label == "positive"}
    neg = {_destutter(t) for t in traces if t.label == "negative"}
    try:
        sample = TraceSample(tuple(sorted(pos, key=lambda t: t.letters)),
                             tuple(sorted(neg, key=lambda t: t.letters)))
    except ValueError as exc:
        raise StageError("learn-ltl", str(exc)) from None
    try:
        f = learn_minimal(sample, max_size)
    except NoSeparator as exc:
        raise StageError("learn-ltl", str(exc)) from None
    full = TraceSample(tuple(t for t in traces if t.label == "positive"),
                       tuple(t for t in traces if t.label == "negative"))
    ok = full.is_consistent(f)
    if not ok:
        log.warning("learned formula %s separates the destuttered traces but not the full ones", f)
    return f, ok


def cmd_learn_ltl(args, cfg):
    if args.max_size is not None:
        cfg["sat"]["max_size"] = args.max_size
    traces = _load_traces(args.traces) + _load_traces(args.pos, "positive") + _load_traces(args.neg, "negative")
    if not traces:
        raise StageError("learn-ltl", "no traces given")
    f, full_ok = learn_formula(traces, cfg["sat"]["max_size"])
    emit(args, envelope(cfg, {}, formula=f.to_json(), text=str(f), size=f.size(),
                        consistent_on_full_traces=full_ok))
    return EXIT_OK


def _load_formula(path):
    try:
        return load_formula(path)
    except (FormulaSyntaxError, KeyError, ValueError) as exc:
        raise StageError("formula", f"cannot read formula from {path}: {exc}") from None


def cmd_monitor_check(args, cfg):
    phi = _load_formula(args.formula)
    t = _load_traces([args.trace])[0]
    m = MonitorAutomaton(phi, t.predicates)
    r = monitor_run(m, t)
    emit(args, envelope(cfg, {}, formula=str(phi), verdict=r.verdict, final=str(r.final), path=r.path,
                        states_visited=[str(s) for s in r.states]))
    return EXIT_VIOLATION if r.verdict == "violated" else EXIT_OK


def _load_seeds(path) -> list[FuzzInput]:
    seeds = []
    for f in _scenario_files(path):
        seeds.append(FuzzInput(load_scenario(f)))
    if not seeds:
        raise StageError("fuzz", f"no .scn seeds in {path}")
    return seeds


def _fuzz_cfg(cfg, args):
    for flag, key in (("budget", "budget"), ("traversal", "traversal"), ("workers", "workers")):
        v = getattr(args, flag, None)
        if v is not None:
            cfg["fuzz"][key] = v
    return fuzz_config(cfg)


def cmd_fuzz(args, cfg):
    fcfg = _fuzz_cfg(cfg, args)
    phi = _load_formula(args.formula)
    report = fuzz(_load_seeds(args.seeds), phi, fcfg)
    emit(args, envelope(cfg, {"fuzz": fcfg.rng_seed}, report=report.to_json()))
    return EXIT_VIOLATION if report.counterexamples else EXIT_OK


def cmd_export_dot(args, cfg):
    d = json.loads(Path(args.artifact).read_text(encoding="utf-8"))
    if "dfa" in d or "transitions" in d:
        dot = DFA.from_json(d.get("dfa", d)).to_dot()
    elif "formula" in d:
        f = d["formula"]
        phi = formula_from_json(f) if isinstance(f, dict) else load_formula(args.artifact)
        m = MonitorAutomaton(phi, PredicateSet().names if phi.atoms() <= set(PredicateSet().names) else None)
        for r in reachable_state_bound(phi, args.depth, predicates=m.predicates):
            if m.classify(r) == "pending":
                for p in range(1 << len(m.atoms)):
                    m.step(r, p)
        dot = m.to_dot()
    else:
        raise StageError("export-dot", "artifact is neither a DFA nor a formula")
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    elif not args.quiet:
        print(dot, end="")
    return EXIT_OK


def _trace_words(s, alphabet, rng: random.Random, n: int, max_len: int):
    words = [()] + [(e,) for e in alphabet]
    while len(words) < n:
        words.append(tuple(rng.choice(alphabet) for _ in range(sample_length(rng, max_len))))
    return list(dict.fromkeys(words))


def cmd_pipeline(args, cfg):
    out = Path(args.out or "pipeline_out")
    out.mkdir(parents=True, exist_ok=True)
    sim = sim_config(cfg)
    seeds_record = {"lstar": cfg["lstar"]["rng_seed"], "fuzz": cfg["fuzz"]["rng_seed"]}
    stage = "load"
    try:
        scenarios = [load_scenario(f) for f in _scenario_files(args.scenarios)] if args.scenarios else []
        if args.rules:
            stage = "generate"
            generated, _ = _generate(args.rules, out / "seeds", cfg, args)
            scenarios += generated
        stage = "load"
        if not scenarios:
            raise StageError("load", "no scenarios to test")
        (out / "seeds").mkdir(exist_ok=True)
        for s in scenarios:
            report = validate_scenario(s, True, sim)
            if not report.ok:
                raise StageError("load", f"scenario {s.name!r} is invalid: {report.dumps()}")
            (out / "seeds" / f"{s.name}.scn").write_text(serialize_scenario(s), encoding="utf-8")

        stage = "simulate"
        rng = random.Random(cfg["lstar"]["rng_seed"])
        traces, runs = [], []
        for s in scenarios:
            alphabet = scenario_alphabet(s, cfg["lstar"]["weather_events"])
            for k, w in enumerate(_trace_words(s, alphabet, rng, args.traces_per_scenario, cfg["lstar"]["max_len"])):
                trace, verdict = run(s, w, sim)
                lt = abstract_trace(trace, PredicateSet.for_scenario(s), verdict)
                traces.append(lt)
                runs.append((s.name, w, lt))
                write_json(out / "traces" / f"{s.name}_{k:03d}.json",
                           envelope(cfg, seeds_record, word=[str(e) for e in w], verdict=verdict.to_json(),
                                    labeled=lt.to_json()))

        stage = "learn-dfa"
        dfas = {}
        for s in scenarios:
            result, _ = _learn_dfa(s, scenario_alphabet(s, cfg["lstar"]["weather_events"]), cfg,
                                   str(out / "membership_cache.json") if not cfg["lstar"]["cache"] else None)
            dfas[s.name] = result.hypothesis.to_json()
        write_json(out / "dfa.json", envelope(cfg, seeds_record, dfas=dfas))

        stage = "learn-ltl"
        if args.formula:
            phi = _load_formula(args.formula)
            origin, full_ok = "given", None
        else:
            phi, full_ok = learn_formula(traces, cfg["sat"]["max_size"])
            origin = "learned"
        write_json(out / "formula.json", envelope(cfg, seeds_record, formula=phi.to_json(), text=str(phi),
                                                  origin=origin, consistent_on_full_traces=full_ok))

        # traces the learned DFA accepts should satisfy the formula too
        mismatches = []
        for name, w, lt in runs:
            dfa = DFA.from_json(dfas[name], Event.parse)
            if dfa.accepts(w) and not eval_ltlf(phi, lt, 0):
                mismatches.append({"scenario": name, "word": [str(e) for e in w]})
        write_json(out / "crosscheck.json", envelope(cfg, seeds_record, dfa_accepts_formula_rejects=mismatches))

        stage = "monitor"
        m = MonitorAutomaton(phi, PredicateSet().names)
        verdicts = {}
        for t in traces:
            v = monitor_run(m, t).verdict
            verdicts[v] = verdicts.get(v, 0) + 1

        stage = "fuzz"
        report = fuzz([FuzzInput(s) for s in scenarios], phi, fuzz_config(cfg))
        write_json(out / "report.json", envelope(cfg, seeds_record, report=report.to_json(),
                                                 trace_verdicts=verdicts))
    except StageError as exc:
        log.error("stage %s failed: %s", exc.stage, exc)
        write_json(out / "error.json", {"stage": exc.stage, "message": str(exc)})
        return EXIT_ERROR
    except (ConfigError, ProviderError, TeacherError, BudgetExhausted, OSError, ParseError, ValueError) as exc:
        log.error("stage %s failed: %s", stage, exc)
        write_json(out / "error.json", {"stage": stage, "message": str(exc)})
        return EXIT_ERROR
    n = len(report.counterexamples)
    if not args.quiet:
        print(f"{n} counterexample(s); coverage {report.coverage['states_pct']}% states -> {out}")
    return EXIT_VIOLATION if n else EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def global_flags(default):
        # subcommands repeat the global flags with suppressed defaults so a
        # flag given before the command is not reset by the subparser
        g = argparse.ArgumentParser(add_help=False, argument_default=default)
        g.add_argument("--config", help="INI config file")
        g.add_argument("--rng-seed", type=int, help="seed for every randomized stage")
        g.add_argument("--quiet", action="store_true", help="only errors on stderr",
                       default=default if default is argparse.SUPPRESS else False)
        g.add_argument("--out", help="output file or directory")
        return g

    common = global_flags(argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="cpstest", parents=[global_flags(None)],
                                 description="Scenario-based testing of driving controllers.")
    ap.add_argument("--version", action="version", version=f"cpstest {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("parse", cmd_parse, "parse a scenario and print its canonical form")
    p.add_argument("file")
    p = add("validate", cmd_validate, "validate a scenario")
    p.add_argument("file")
    p.add_argument("--dry-run", action="store_true", default=False)
    p = add("simulate", cmd_simulate, "run a scenario under an event word")
    p.add_argument("file")
    p.add_argument("--word", "--events", default="", help="comma-separated events, e.g. NONE,NPC_BRAKE(v1)")
    p = add("gen", cmd_gen, "draft scenarios from rule text with a language model")
    p.add_argument("--rules", required=True)
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--provider", choices=("mock", "http"), default=None)
    p.add_argument("--script", default=None, help="mock reply script (JSON array of strings)")
    p = add("learn-dfa", cmd_learn_dfa, "learn a pass/fail DFA over event words")
    p.add_argument("file")
    p.add_argument("--alphabet", default=None)
    p.add_argument("--eq-budget", type=int, default=None)
    p.add_argument("--cache", default=None, help="membership cache file")
    p = add("learn-ltl", cmd_learn_ltl, "learn a minimal separating LTLf formula")
    p.add_argument("traces", nargs="*", help="labeled trace files or directories")
    p.add_argument("--pos", action="append", default=[], help="traces to treat as positive")
    p.add_argument("--neg", action="append", default=[], help="traces to treat as negative")
    p.add_argument("--max-size", type=int, default=None)
    p = add("monitor-check", cmd_monitor_check, "run a formula's monitor over a labeled trace")
    p.add_argument("--formula", required=True)
    p.add_argument("--trace", required=True)
    p = add("fuzz", cmd_fuzz, "coverage-guided fuzzing against a formula")
    p.add_argument("--seeds", required=True)
    p.add_argument("--formula", required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--traversal", choices=("dfs", "bfs", "random_walk"), default=None)
    p.add_argument("--workers", type=int, default=None)
    p = add("pipeline", cmd_pipeline, "generate, simulate, learn, monitor and fuzz")
    p.add_argument("--scenarios", default=None, help="directory of .scn files")
    p.add_argument("--rules", default=None)
    p.add_argument("--formula", default=None)
    p.add_argument("--provider", choices=("mock", "http"), default=None)
    p.add_argument("--script", default=None)
    p.add_argument("--traces-per-scenario", type=int, default=12)
    p = add("export-dot", cmd_export_dot, "render a DFA or formula monitor as DOT")
    p.add_argument("artifact")
    p.add_argument("--depth", type=int, default=10)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        overrides = {}
        if args.rng_seed is not None:
            overrides = {"lstar": {"rng_seed": args.rng_seed}, "fuzz": {"rng_seed": args.rng_seed}}
        cfg = load_config(args.config, overrides)
        return args.func(args, cfg)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
    except (ConfigError, ProviderError, TeacherError, BudgetExhausted, FormulaSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (OSError, ParseError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
