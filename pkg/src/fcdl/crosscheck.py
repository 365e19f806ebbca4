"""Run every applicable evaluator on the same input and compare."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .analysis import FragmentReport, classify
from .core import ANSWER, Program
from .fixpoint import evaluate, evaluate_semi_naive, factor_table
from .syntax import parse_program
from .topdown import MemoSolver, eval_deterministic, eval_sd

EVALUATORS = ("fixpoint", "semi-naive", "memoized", "deterministic", "sd")


def applicable(prog: Program, report: FragmentReport) -> list[str]:
    names = ["fixpoint", "semi-naive", "memoized"]
    if prog.is_boolean and report.tier in ("sd-fast", "deterministic-topdown"):
        names.append("deterministic")
    if prog.is_boolean and report.tier == "sd-fast":
        names.append("sd")
    return names


def run_evaluator(name: str, prog: Program, w: str, report: FragmentReport):
    """Verdict (bool) for Boolean programs, else the set of Ans tuples."""
    if name in ("fixpoint", "semi-naive"):
        store = (evaluate if name == "fixpoint" else evaluate_semi_naive)(prog, w)
        return () in store.relations[ANSWER] if prog.is_boolean else frozenset(store.texts(ANSWER))
    if name == "memoized":
        table = factor_table(prog, w)
        solver = MemoSolver(prog, table)
        if prog.is_boolean:
            return solver.holds(ANSWER, ())
        arity = prog.arity(ANSWER)
        return frozenset(t for t in itertools.product(table.factors, repeat=arity) if solver.holds(ANSWER, t))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if name == "deterministic":
            return eval_deterministic(prog, w, report=report, trace=False).accepted
        if name == "sd":
            return eval_sd(prog, w, report=report, trace=False).accepted
    raise ValueError(f"unknown evaluator {name!r}")


def verdicts(prog: Program, w: str, report: FragmentReport | None = None, names: Iterable[str] | None = None) -> dict:
    report = report or classify(prog)
    return {n: run_evaluator(n, prog, w, report) for n in (names or applicable(prog, report))}


def words(letters: str, max_len: int) -> Iterable[str]:
    """All words up to max_len in shortlex order."""
    for n in range(max_len + 1):
        for t in itertools.product(letters, repeat=n):
            yield "".join(t)


@dataclass
class Disagreement:
    program: str
    word: str
    verdicts: dict

    def to_json(self) -> dict:
        show = {k: (v if isinstance(v, bool) else sorted(list(t) for t in v)) for k, v in self.verdicts.items()}
        return {"program": self.program, "word": self.word, "verdicts": show}


@dataclass
class CorpusSummary:
    programs: list[dict] = field(default_factory=list)
    disagreements: list[Disagreement] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def to_json(self) -> dict:
        return {
            "programs": self.programs,
            "cases": sum(p["words"] for p in self.programs),
            "disagreements": [d.to_json() for d in self.disagreements],
            "ok": self.ok,
        }


def check_program(name: str, prog: Program, letters: str, max_len: int, summary: CorpusSummary) -> None:
    report = classify(prog)
    if prog.declared_alphabet:
        letters = "".join(c for c in letters if c in prog.alphabet)
    names = applicable(prog, report)
    count = 0
    for w in words(letters, max_len):
        count += 1
        got = verdicts(prog, w, report, names)
        if len(set(got.values())) > 1:
            # shortlex order makes the first mismatch a minimal counterexample
            summary.disagreements.append(Disagreement(name, w, got))
            break
    summary.programs.append({"program": name, "tier": report.tier, "evaluators": names, "words": count})


def check_corpus(directory: str | Path, *, letters: str = "ab", max_len: int = 8) -> CorpusSummary:
    summary = CorpusSummary()
    for path in sorted(Path(directory).glob("*.fcd")):
        check_program(path.name, parse_program(path.read_text()), letters, max_len, summary)
    return summary
