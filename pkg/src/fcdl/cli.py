"""fcdl command line: check | eval | compile | gen-pspace | corpus.

Exit codes: 0 success, 2 parse or validation error, 3 precondition not
met, 4 cross-check disagreement, 5 resource budget exhausted."""
from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
import warnings
from importlib import resources
from pathlib import Path

from .analysis import classify
from .automata import compile_2dfa, compile_2nfa
from .core import ANSWER, BudgetError, FcdlError, InputError, UsageError, ValidationError
from .crosscheck import check_corpus
from .drx import compile_drx_dolla, compile_drx_dollaplus
from .fixpoint import evaluate_semi_naive, model_check
from .pspace import generate_pspace_instance, simulate_turing
from .syntax import ParseError, SpecError, parse_automaton, parse_program, parse_turing, print_program
from .topdown import EvalResult, MemoSolver, eval_deterministic, eval_sd, factor_table

EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, EXIT_DISAGREE, EXIT_BUDGET = 0, 2, 3, 4, 5

TIER_FLAGS = {"fixpoint": "fixpoint", "memo": "memoized-topdown", "det": "deterministic-topdown", "sd": "sd-fast"}
_ANY = ("fixpoint", "memoized-topdown")
AVAILABLE = {
    "fixpoint": _ANY,
    "memoized-topdown": _ANY,
    "deterministic-topdown": _ANY + ("deterministic-topdown",),
    "sd-fast": _ANY + ("deterministic-topdown", "sd-fast"),
}


class Disagreement(FcdlError):
    pass


def _emit(args, report: dict, text: str) -> None:
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e.strerror}", _nospan()) from e


def _nospan():
    from .core import SourceSpan

    return SourceSpan(0, 0, 1, 1)


def _words(spec: str) -> list[str]:
    if spec.startswith("@"):
        return _read(spec[1:]).splitlines()
    return [spec]


# ---------------------------------------------------------------- commands


def cmd_check(args) -> int:
    start = time.perf_counter()
    prog = parse_program(_read(args.program))
    report = classify(prog)
    out = {
        "command": "check",
        "inputs": {"program": args.program},
        "report": report.to_json(),
        "tier": report.tier,
        "timing": {"wall": time.perf_counter() - start},
    }
    flags = " ".join(f"{k}={'yes' if v else 'no'}" for k, v in report.flags.items())
    lines = [f"tier: {report.tier}", f"flags: {flags}"]
    lines += [f"  [{flag}] {d.msg}" for flag, d in report.diagnostics]
    _emit(args, out, "\n".join(lines))
    return EXIT_OK


def _run_tier(tier: str, prog, w: str, report) -> tuple[bool, dict | None, int, str]:
    """Returns (verdict, trace json, rule applications, tier actually used)."""
    if tier == "fixpoint":
        store = evaluate_semi_naive(prog, w)
        return () in store.relations[ANSWER], None, sum(sum(d.values()) for d in store.deltas), tier
    if tier == "memoized-topdown":
        solver = MemoSolver(prog, factor_table(prog, w))
        return solver.holds(ANSWER, ()), None, len(solver.seen), tier
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res: EvalResult = (eval_sd if tier == "sd-fast" else eval_deterministic)(prog, w, report=report)
    for c in caught:
        print(f"warning: {c.message}", file=sys.stderr)
    return res.accepted, res.trace.to_json(), len(res.trace.steps), res.tier


def cmd_eval(args) -> int:
    prog = parse_program(_read(args.program))
    report = classify(prog)
    words = _words(args.word)
    out: dict = {
        "command": "eval",
        "inputs": {"program": args.program, "words": words},
        "report": report.to_json(),
    }
    start = time.perf_counter()
    if not prog.is_boolean:
        if args.tier not in ("auto", "fixpoint"):
            raise UsageError(f"{ANSWER} has arity {prog.arity(ANSWER)}; only the fixpoint tier can list answers")
        answers = {}
        for w in words:
            store = evaluate_semi_naive(prog, w)
            answers[w] = sorted(list(t) for t in store.texts(ANSWER))
        out.update(tier="fixpoint", answers=answers, timing={"wall": time.perf_counter() - start})
        text = "\n".join(f"{w!r}: {len(a)} answers {a}" for w, a in answers.items())
        _emit(args, out, text)
        return EXIT_OK
    tier = report.tier if args.tier == "auto" else TIER_FLAGS[args.tier]
    if tier not in AVAILABLE[report.tier]:
        raise UsageError(f"program is classified {report.tier}; tier {args.tier} is not available for it")
    verdicts, traces, walls, apps = {}, {}, [], 0
    used = tier
    for w in words:
        times = []
        for _ in range(max(1, args.bench)):
            t0 = time.perf_counter()
            ok, trace, n_apps, used = _run_tier(tier, prog, w, report)
            times.append(time.perf_counter() - t0)
        walls.append(statistics.median(times))
        apps += n_apps
        verdicts[w] = ok
        if args.trace:
            traces[w] = trace
        if args.verify:
            expected = model_check(prog, w)
            if expected != ok:
                raise Disagreement(f"{used} says {'Accept' if ok else 'Reject'} on {w!r} but the fixpoint says {'Accept' if expected else 'Reject'}")
    out.update(
        tier=used,
        verdicts={w: "Accept" if v else "Reject" for w, v in verdicts.items()},
        timing={"wall": time.perf_counter() - start, "medianWall": statistics.median(walls) if walls else 0.0, "ruleApplications": apps},
    )
    if args.trace:
        out["trace"] = traces
    if args.verify:
        out["verified"] = True
    lines = [f"{w!r}: {'Accept' if v else 'Reject'}" for w, v in verdicts.items()]
    if args.trace:
        for w, tr in traces.items():
            if tr is None:
                lines.append(f"trace for {w!r}: not available on tier {used}")
                continue
            lines.append(f"trace for {w!r}:")
            for s in tr["steps"]:
                binds = ", ".join(f"{k}={v!r}" for k, v in s["bindings"].items())
                lines.append(f"  {'  ' * s['depth']}rule {s['rule']}: {binds}")
    if args.bench > 1:
        lines.append(f"median wall time: {statistics.median(walls):.6f} s over {args.bench} runs; rule applications: {apps}")
    _emit(args, out, "\n".join(lines))
    return EXIT_OK


def cmd_compile(args) -> int:
    start = time.perf_counter()
    stats = None
    if args.drx is not None:
        if args.target == "linear":
            raise UsageError("regexes compile to --target dolla or dollaplus")
        comp = compile_drx_dolla if args.target == "dolla" else compile_drx_dollaplus
        prog, stats = comp(args.drx, args.alphabet)
        if not stats.within_bounds:
            raise AssertionError(f"compiled program exceeds its size bounds: {stats.to_json()}")
        source = {"drx": args.drx}
    else:
        machine = parse_automaton(_read(args.automaton))
        if args.target == "dollaplus":
            raise UsageError("automata compile to --target dolla (deterministic) or linear")
        prog = compile_2dfa(machine) if args.target == "dolla" else compile_2nfa(machine)
        source = {"automaton": args.automaton}
    text = print_program(prog)
    if args.output:
        Path(args.output).write_text(text + "\n")
    report = classify(prog)
    out = {
        "command": "compile",
        "inputs": source,
        "target": args.target,
        "report": report.to_json(),
        "tier": report.tier,
        "rules": len(prog.rules),
        "symbols": len(prog.symbols),
        "timing": {"wall": time.perf_counter() - start},
    }
    if stats is not None:
        out["stats"] = stats.to_json()
    if args.output:
        out["output"] = args.output
    else:
        out["program"] = text
    summary = f"# {len(prog.rules)} rules, {len(prog.symbols)} relation symbols, tier {report.tier}"
    if stats is not None:
        summary += f" (bounds: {stats.bound_rules} rules, {stats.bound_symbols} symbols)"
    _emit(args, out, summary if args.output else f"{summary}\n{text}")
    return EXIT_OK


def cmd_gen_pspace(args) -> int:
    start = time.perf_counter()
    machine = parse_turing(_read(args.machine))
    prog, word = generate_pspace_instance(machine, args.k)
    text = print_program(prog)
    if args.output:
        Path(args.output).write_text(text + "\n")
    out = {
        "command": "gen-pspace",
        "inputs": {"machine": args.machine, "k": args.k},
        "word": word,
        "rules": len(prog.rules),
    }
    lines = [f"# word: {word!r}, {len(prog.rules)} rules"]
    if args.check:
        expected = simulate_turing(machine, args.k)
        got = model_check(prog, word)
        out["verdict"] = "Accept" if got else "Reject"
        out["simulation"] = "Accept" if expected else "Reject"
        lines.append(f"# program: {out['verdict']}, direct simulation: {out['simulation']}")
        if got != expected:
            raise Disagreement("generated program and machine simulation disagree")
    out["timing"] = {"wall": time.perf_counter() - start}
    if not args.output:
        out["program"] = text
        lines.append(text)
    _emit(args, out, "\n".join(lines))
    return EXIT_OK


def cmd_corpus(args) -> int:
    start = time.perf_counter()
    directory = args.dir or str(resources.files("fcdl") / "corpus")
    summary = check_corpus(directory, letters=args.letters, max_len=args.max_len)
    out = {"command": "corpus", "inputs": {"dir": directory, "maxLen": args.max_len}, **summary.to_json()}
    out["timing"] = {"wall": time.perf_counter() - start}
    if not summary.programs:
        print(f"warning: no .fcd programs in {directory}", file=sys.stderr)
    lines = [f"{p['program']}: {p['tier']}, {p['words']} words, evaluators {', '.join(p['evaluators'])}" for p in summary.programs]
    for d in summary.disagreements:
        lines.append(f"DISAGREE {d.program} on {d.word!r}: {d.to_json()['verdicts']}")
    lines.append(f"{len(summary.programs)} programs, {out['cases']} cases, {len(summary.disagreements)} disagreements")
    _emit(args, out, "\n".join(lines))
    return EXIT_OK if summary.ok else EXIT_DISAGREE


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fcdl", description="Datalog over the factors of a word.")
    p.add_argument("--json", action="store_true", help="print machine-readable reports")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="classify a program")
    c.add_argument("program")
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("eval", help="evaluate a program on a word (or @file, one word per line)")
    e.add_argument("program")
    e.add_argument("word")
    e.add_argument("--tier", choices=["auto", *TIER_FLAGS], default="auto")
    e.add_argument("--trace", action="store_true")
    e.add_argument("--verify", action="store_true", help="cross-check against the fixpoint evaluator")
    e.add_argument("--bench", type=int, default=1, metavar="N", help="repeat N times and report the median")
    e.set_defaults(func=cmd_eval)

    k = sub.add_parser("compile", help="compile a regex or an automaton into a program")
    src = k.add_mutually_exclusive_group(required=True)
    src.add_argument("--drx", metavar="REGEX")
    src.add_argument("--automaton", metavar="PATH")
    k.add_argument("--target", choices=["dolla", "dollaplus", "linear"], default="dolla")
    k.add_argument("--alphabet", help="alphabet for regex compilation (default: letters of the regex)")
    k.add_argument("-o", "--output")
    k.set_defaults(func=cmd_compile)

    g = sub.add_parser("gen-pspace", help="turn a space-bounded Turing machine into a program and word")
    g.add_argument("machine")
    g.add_argument("-k", type=int, required=True, help="space bound")
    g.add_argument("-o", "--output")
    g.add_argument("--check", action="store_true", help="evaluate it and compare with direct simulation")
    g.set_defaults(func=cmd_gen_pspace)

    r = sub.add_parser("corpus", help="cross-check all evaluators on every program in a directory")
    r.add_argument("--dir")
    r.add_argument("--max-len", type=int, default=8)
    r.add_argument("--letters", default="ab")
    r.set_defaults(func=cmd_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # accept --json anywhere on the line
    want_json = "--json" in argv
    argv = [a for a in argv if a != "--json"]
    args = parser.parse_args(argv)
    args.json = want_json
    try:
        return args.func(args)
    except (ParseError, ValidationError, SpecError, InputError) as e:
        return _fail(args, EXIT_PARSE, e)
    except UsageError as e:
        return _fail(args, EXIT_PRECONDITION, e)
    except Disagreement as e:
        return _fail(args, EXIT_DISAGREE, e)
    except BudgetError as e:
        return _fail(args, EXIT_BUDGET, e)


def _fail(args, code: int, e: Exception) -> int:
    err = {"command": args.command, "error": str(e), "exitCode": code}
    span = getattr(e, "span", None)
    if span is not None:
        err["span"] = span.to_json()
    if args.json:
        print(json.dumps(err, indent=2, sort_keys=True))
    else:
        print(f"error: {e}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
