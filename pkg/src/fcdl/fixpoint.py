"""Bottom-up evaluation: every rule is fired against the current relations
until nothing new is derived. This is the reference semantics the other
evaluators are tested against."""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .core import (
    ANSWER,
    UNIV,
    BudgetError,
    DrxAtom,
    Equation,
    FactorTable,
    Program,
    RelAtom,
    Rule,
    UsageError,
    Var,
    intern_factors,
    match_text,
)

Tuple = tuple[int, ...]


@dataclass(frozen=True)
class Budget:
    max_tuples: int = 10_000_000
    seconds: float = 30.0

    @classmethod
    def from_env(cls) -> "Budget":
        """FCDL_BUDGET="tuples=N,seconds=S"; either key may be omitted."""
        raw = os.environ.get("FCDL_BUDGET", "").strip()
        if not raw:
            return cls()
        kw: dict = {}
        for part in raw.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key == "tuples":
                kw["max_tuples"] = int(val)
            elif key == "seconds":
                kw["seconds"] = float(val)
            else:
                raise UsageError(f"unknown FCDL_BUDGET key {key!r}")
        return cls(**kw)


class _Clock:
    def __init__(self, budget: Budget):
        self.budget = budget
        self.deadline = time.monotonic() + budget.seconds
        self.ticks = 0

    def tick(self) -> None:
        self.ticks += 1
        if self.ticks & 1023 == 0 and time.monotonic() > self.deadline:
            raise BudgetError(f"evaluation exceeded {self.budget.seconds} s")


def factor_table(prog: Program, w: str) -> FactorTable:
    return intern_factors(w, prog.alphabet if prog.declared_alphabet else None)


@dataclass
class RelationStore:
    table: FactorTable
    arities: dict[str, int]
    relations: dict[str, set[Tuple]] = field(default_factory=dict)
    iterations: int = 0
    deltas: list[dict[str, int]] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        for sym in self.arities:
            self.relations.setdefault(sym, set())

    def __len__(self) -> int:
        return sum(len(r) for r in self.relations.values())

    def texts(self, sym: str) -> set[tuple[str, ...]]:
        return {tuple(self.table.text(i) for i in t) for t in self.relations[sym]}

    def contains(self, sym: str, values: tuple[str, ...]) -> bool:
        ids = tuple(self.table.get_id(v) for v in values)
        return None not in ids and ids in self.relations[sym]

    def snapshot(self) -> dict[str, frozenset[Tuple]]:
        return {s: frozenset(r) for s, r in self.relations.items()}

    def to_json(self) -> dict:
        return {"relations": {s: sorted([list(t) for t in self.texts(s)]) for s in sorted(self.relations)}}


def _atom_vars(atom) -> list[Var]:
    if isinstance(atom, RelAtom):
        return list(atom.args)
    if isinstance(atom, DrxAtom):
        return [atom.var]
    return atom.variables()


def _plan_cost(atom, env: Mapping[Var, str], sizes: Mapping[str, int]) -> tuple:
    unknown = {v for v in _atom_vars(atom) if v not in env}
    if not unknown:
        return (0, 0)
    if isinstance(atom, RelAtom):
        return (1, sizes.get(atom.symbol, 0), len(unknown))
    if isinstance(atom, Equation):
        return (1 if atom.lhs in env else 2, len(unknown), 0)
    return (3, 0, 0)


class _Joiner:
    """Greedy most-bound-first evaluation of one rule body."""

    def __init__(self, table: FactorTable, clock: _Clock, drx_cache: dict):
        self.table = table
        self.clock = clock
        self.drx_cache = drx_cache
        self.indexes: dict = {}

    def lookup(self, source: set, positions: tuple[int, ...], key: tuple) -> list:
        """Tuples of `source` with the given values at `positions`. The index
        is rebuilt when the set has grown since it was made."""
        slot = (id(source), positions)
        entry = self.indexes.get(slot)
        if entry is None or entry[0] is not source or entry[1] != len(source):
            idx: dict = {}
            for t in source:
                idx.setdefault(tuple(t[k] for k in positions), []).append(t)
            entry = self.indexes[slot] = (source, len(source), idx)
        return entry[2].get(key, [])

    def matcher(self, atom: DrxAtom):
        from .drx import DrxMatcher

        m = self.drx_cache.get(atom.regex)
        if m is None:
            m = self.drx_cache[atom.regex] = DrxMatcher(atom.regex)
        return m

    def solve(self, body: list, sources: list, env: dict[Var, str]) -> Iterator[dict[Var, str]]:
        """`sources[i]` is the tuple set used for body[i] when it is a relation atom."""
        if not body:
            yield env
            return
        pick = min(range(len(body)), key=lambda i: (_plan_cost(body[i], env, {body[i].symbol: len(sources[i])} if isinstance(body[i], RelAtom) else {}), i))
        atom, rest, rest_src = body[pick], body[:pick] + body[pick + 1:], sources[:pick] + sources[pick + 1:]
        for ext in self.extend(atom, sources[pick], env):
            self.clock.tick()
            added = [v for v in ext if v not in env]
            for v in added:
                env[v] = ext[v]
            yield from self.solve(rest, rest_src, env)
            for v in added:
                del env[v]

    def extend(self, atom, source, env: Mapping[Var, str]) -> Iterator[dict[Var, str]]:
        table = self.table
        if isinstance(atom, Equation):
            yield from match_text(atom, env, table)
        elif isinstance(atom, RelAtom):
            bound = [(k, table.get_id(env[v])) for k, v in enumerate(atom.args) if v in env]
            candidates = self.lookup(source, tuple(k for k, _ in bound), tuple(f for _, f in bound)) if bound else source
            for t in candidates:
                ext: dict[Var, str] = {}
                ok = True
                for k, v in enumerate(atom.args):
                    val = table.text(t[k])
                    if ext.setdefault(v, val) != val:
                        ok = False
                        break
                if ok:
                    yield {v: s for v, s in ext.items() if v not in env}
        else:
            match = self.matcher(atom)
            if atom.var in env:
                if match(env[atom.var]):
                    yield {}
            else:
                for f in table.factors:
                    if match(f):
                        yield {atom.var: f}


def _fire(rule: Rule, joiner: _Joiner, sources: list, store: RelationStore) -> Iterator[Tuple]:
    table = store.table
    env: dict[Var, str] = {UNIV: table.word}
    for b in joiner.solve(list(rule.body), sources, env):
        yield tuple(table.id(b[v]) for v in rule.args)


def iteration_bound(store: RelationStore) -> int:
    # each productive round adds a tuple; the last round adds none
    max_arity = max(store.arities.values(), default=0)
    return len(store.table) ** max_arity * len(store.arities) + 1


def _finish(store: RelationStore) -> None:
    assert store.iterations <= iteration_bound(store), "fixpoint iteration bound exceeded"


def _check_budget(store: RelationStore, budget: Budget) -> None:
    if len(store) > budget.max_tuples:
        raise BudgetError(f"relation store exceeded {budget.max_tuples} tuples")


def _record(store: RelationStore, new: dict[str, set[Tuple]]) -> bool:
    before = len(store)
    for sym, ts in new.items():
        store.relations[sym] |= ts
    store.iterations += 1
    store.deltas.append({s: len(ts) for s, ts in new.items() if ts})
    store.sizes.append(len(store))
    assert len(store) >= before, "relation store shrank"
    return any(new.values())


def evaluate(prog: Program, w: str, *, budget: Budget | None = None, table: FactorTable | None = None) -> RelationStore:
    """Naive iteration: every round re-fires every rule on the whole store."""
    budget = budget or Budget.from_env()
    table = table or factor_table(prog, w)
    store = RelationStore(table, dict(prog.relations))
    clock = _Clock(budget)
    joiner = _Joiner(table, clock, {})
    while True:
        new: dict[str, set[Tuple]] = {s: set() for s in store.relations}
        for rule in prog.rules:
            sources = [store.relations[a.symbol] if isinstance(a, RelAtom) else None for a in rule.body]
            for t in _fire(rule, joiner, sources, store):
                if t not in store.relations[rule.head]:
                    new[rule.head].add(t)
        if not _record(store, new):
            break
        _check_budget(store, budget)
    _finish(store)
    return store


def evaluate_semi_naive(prog: Program, w: str, *, budget: Budget | None = None, table: FactorTable | None = None) -> RelationStore:
    """Differential iteration: after the first round a rule only fires with at
    least one relation atom reading last round's new tuples."""
    budget = budget or Budget.from_env()
    table = table or factor_table(prog, w)
    store = RelationStore(table, dict(prog.relations))
    clock = _Clock(budget)
    joiner = _Joiner(table, clock, {})
    delta: dict[str, set[Tuple]] = {s: set() for s in store.relations}
    for rule in prog.rules:
        if rule.relation_atoms:
            continue
        for t in _fire(rule, joiner, [None] * len(rule.body), store):
            delta[rule.head].add(t)
    changed = _record(store, delta)
    _check_budget(store, budget)
    while changed:
        new: dict[str, set[Tuple]] = {s: set() for s in store.relations}
        for rule in prog.rules:
            for i, atom in enumerate(rule.body):
                if not isinstance(atom, RelAtom) or not delta[atom.symbol]:
                    continue
                sources = [
                    (delta[a.symbol] if j == i else store.relations[a.symbol]) if isinstance(a, RelAtom) else None
                    for j, a in enumerate(rule.body)
                ]
                for t in _fire(rule, joiner, sources, store):
                    if t not in store.relations[rule.head]:
                        new[rule.head].add(t)
        changed = _record(store, new)
        delta = new
        _check_budget(store, budget)
    _finish(store)
    return store


def model_check(prog: Program, w: str, *, semi_naive: bool = True, budget: Budget | None = None) -> bool:
    if not prog.is_boolean:
        raise UsageError(f"model checking needs a Boolean program; {ANSWER} has arity {prog.arity(ANSWER)}")
    store = (evaluate_semi_naive if semi_naive else evaluate)(prog, w, budget=budget)
    return () in store.relations[ANSWER]
