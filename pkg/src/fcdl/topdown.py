"""Goal-directed evaluation.

The deterministic evaluator follows one chain of rule applications from
Ans, choosing the single applicable rule at every step. Values are spans
(i, j) into the input word and are compared by content, so a step costs
O(1) for letter-by-letter rules. Variables that are only passed along are
placeholders (union-find cells) until a later rule grounds them.

The memoized evaluator explores ground goals as an AND-OR graph and proves
them by counting, which gives least-fixpoint semantics on cycles."""
from __future__ import annotations

import itertools
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .analysis import EMPTY, END, START, FragmentReport, classify, rule_shapes
from .core import (
    ANSWER,
    UNIV,
    DrxAtom,
    Equation,
    FactorTable,
    FcdlError,
    InputError,
    Program,
    RelAtom,
    Rule,
    Term,
    UsageError,
    Var,
    match_all,
)
from .fixpoint import Budget, _Clock, factor_table

NOMATCH = "<none>"  # feature of a value that is not a prefix (or suffix) of the word

Span = tuple[int, int]


class InsufficientInstantiation(FcdlError):
    """A rule choice or equation depends on a still-unbound placeholder."""


class InconsistencyError(FcdlError, AssertionError):
    """The analysis promised something the evaluation contradicts."""


# ---------------------------------------------------------------- placeholders


class Cell:
    __slots__ = ("id", "parent", "value")

    def __init__(self, ident: int):
        self.id = ident
        self.parent: Cell | None = None
        self.value: Span | None = None

    def root(self) -> "Cell":
        c = self
        while c.parent is not None:
            c = c.parent
        return c

    def __repr__(self) -> str:
        return f"Cell({self.id})"


class _Store:
    """Span/cell bookkeeping with an undo trail."""

    def __init__(self, w: str):
        self.w = w
        self.n = len(w)
        self.trail: list[tuple[str, Cell]] = []
        self.cells = 0

    def fresh(self) -> Cell:
        self.cells += 1
        return Cell(self.cells)

    def resolve(self, v):
        if isinstance(v, Cell):
            r = v.root()
            return r.value if r.value is not None else r
        return v

    def bind(self, cell: Cell, span: Span) -> None:
        r = cell.root()
        self.trail.append(("v", r))
        r.value = span

    def union(self, a: Cell, b: Cell) -> None:
        ra, rb = a.root(), b.root()
        if ra is not rb:
            self.trail.append(("p", ra))
            ra.parent = rb

    def undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            kind, c = self.trail.pop()
            if kind == "v":
                c.value = None
            else:
                c.parent = None

    def text(self, s: Span) -> str:
        return self.w[s[0]:s[1]]

    def same(self, a: Span, b: Span) -> bool:
        if a == b:
            return True
        la, lb = a[1] - a[0], b[1] - b[0]
        return la == lb and self.w[a[0]:a[1]] == self.w[b[0]:b[1]]

    def unify(self, a, b) -> bool:
        a, b = self.resolve(a), self.resolve(b)
        if isinstance(a, Cell) and isinstance(b, Cell):
            self.union(a, b)
            return True
        if isinstance(a, Cell):
            self.bind(a, b)
            return True
        if isinstance(b, Cell):
            self.bind(b, a)
            return True
        return self.same(a, b)

    def locate(self, s: str) -> Span | None:
        i = self.w.find(s)
        return None if i < 0 else (i, i + len(s))

    def key(self, v) -> object:
        v = self.resolve(v)
        return ("cell", v.id) if isinstance(v, Cell) else self.text(v)


def _verify(store: _Store, eq: Equation, env: Mapping[Var, object]) -> bool:
    lhs = store.resolve(env[eq.lhs])
    i, j = lhs
    w = store.w
    pos = i
    for it in eq.rhs.items:
        if isinstance(it, Term):
            if pos >= j or w[pos] != it.symbol:
                return False
            pos += 1
            continue
        a, b = store.resolve(env[it])
        length = b - a
        if pos + length > j:
            return False
        if a != pos and w[a:b] != w[pos:pos + length]:
            return False
        pos += length
    return pos == j


def _solve(store: _Store, eq: Equation, env: Mapping[Var, object], unknown: set[Var] | None = None) -> tuple[Var, Span | None]:
    """The one unknown of `eq` and its forced value (None when unsatisfiable)."""
    if unknown is None:
        unknown = {v for v in eq.variables() if isinstance(store.resolve(env.get(v, _MISSING)), (Cell, _Missing))}
    if len(unknown) != 1:
        raise UsageError(f"equation for {eq.lhs} has {len(unknown)} unbound variables; exactly one is required")
    (v,) = unknown
    w = store.w
    items = eq.rhs.items
    if v != eq.lhs:
        li, lj = store.resolve(env[eq.lhs])
        ground = 0
        m = 0
        for it in items:
            if isinstance(it, Term):
                ground += 1
            elif it == v:
                m += 1
            else:
                a, b = store.resolve(env[it])
                ground += b - a
        rest = lj - li - ground
        if rest < 0 or rest % m:
            return v, None
        length = rest // m
        pos = li
        found: Span | None = None
        for it in items:
            if isinstance(it, Term):
                if w[pos] != it.symbol:
                    return v, None
                pos += 1
            elif it == v:
                if found is None:
                    found = (pos, pos + length)
                elif w[found[0]:found[1]] != w[pos:pos + length]:
                    return v, None
                pos += length
            else:
                a, b = store.resolve(env[it])
                if a != pos and w[a:b] != w[pos:pos + b - a]:
                    return v, None
                pos += b - a
        return v, found
    # the left side is the unknown: try to read the right side contiguously
    spans = [None if isinstance(it, Term) else store.resolve(env[it]) for it in items]
    anchor = next((k for k, s in enumerate(spans) if s is not None), None)
    if anchor is not None:
        start = spans[anchor][0] - anchor
        if start >= 0:
            pos = start
            ok = True
            for it, s in zip(items, spans):
                if s is None:
                    if pos >= store.n or w[pos] != it.symbol:
                        ok = False
                        break
                    pos += 1
                else:
                    length = s[1] - s[0]
                    if s[0] != pos and w[s[0]:s[1]] != w[pos:pos + length]:
                        ok = False
                        break
                    pos += length
            if ok and pos <= store.n:
                return v, (start, pos)
    text = "".join(it.symbol if s is None else w[s[0]:s[1]] for it, s in zip(items, spans))
    return v, store.locate(text)


class _Missing:
    pass


_MISSING = _Missing()


def solve_unique_equation(eq: Equation, bindings: Mapping[Var, str], w: str | None = None) -> dict[Var, str] | None:
    """Solve `eq` for its single unbound variable. Values are strings; with
    `w` given, univ is w and the result must be a factor of w. Returns the
    new binding, or None when no value satisfies the equation."""
    known = dict(bindings)
    if w is not None:
        known.setdefault(UNIV, w)
    unknown = [v for v in eq.variables() if v not in known]
    if len(unknown) != 1:
        raise UsageError(f"equation for {eq.lhs} has {len(unknown)} unbound variables; exactly one is required")
    if w is None:
        if unknown[0] == eq.lhs:
            return {eq.lhs: "".join(it.symbol if isinstance(it, Term) else known[it] for it in eq.rhs.items)}
        # every solution is a factor of the left side, so it can serve as the word
        w = "\x00".join([known[eq.lhs], *known.values()])
    store = _Store(w)
    env: dict[Var, object] = {}
    for v, text in known.items():
        span = (0, len(w)) if v == UNIV else store.locate(text)
        if span is None:
            return None
        env[v] = span
    var, span = _solve(store, eq, env)
    return None if span is None else {var: store.text(span)}


# ---------------------------------------------------------------- rule lookup


@dataclass
class _SymbolTable:
    rules: list[int]
    fields: list[tuple[object, str]]
    tables: dict[tuple[object, str], dict[str, int]]
    wild: dict[tuple[object, str], int]


@dataclass
class RuleLookup:
    """Per head symbol, one small map per constrained feature of a head
    value (its first or last letter, emptiness, or the letter next to it in
    the word) to the set of rules compatible with it, as a bitmask."""

    mode: str  # "profile" | "shape"
    symbols: dict[str, _SymbolTable]
    entries: int

    def candidates(self, symbol: str, feature) -> list[int]:
        """`feature(position, kind)` returns the observed value, or None if
        the value is a placeholder."""
        t = self.symbols.get(symbol)
        if t is None:
            return []
        mask = (1 << len(t.rules)) - 1
        for f in t.fields:
            constrained = mask & ~t.wild[f]
            if not constrained:
                continue
            obs = feature(*f)
            if obs is None:
                raise InsufficientInstantiation(f"choosing a rule for {symbol} needs argument {f[0]}, which is a placeholder")
            mask &= t.tables[f].get(obs, 0) | t.wild[f]
            if not mask:
                return []
        return [r for k, r in enumerate(t.rules) if mask >> k & 1]


def _requirements_from_profile(profile, orientation: Mapping[object, str]) -> dict[tuple[object, str], str]:
    req: dict[tuple[object, str], str] = {}
    for p, val in profile.base.items():
        if val is None:
            continue
        side = orientation.get(p, "left")
        req[(p, "first" if side == "left" else "last")] = val
    for p, val in profile.after.items():
        if val is not None:
            req[(p, "after")] = val
    for p, val in profile.before.items():
        if val is not None:
            req[(p, "before")] = val
    return req


def _requirements_from_shapes(shapes) -> dict[tuple[object, str], str]:
    req: dict[tuple[object, str], str] = {}
    for p, s in shapes.items():
        if s.exact == 0:
            req[(p, "first")] = EMPTY
        elif s.prefix:
            req[(p, "first")] = s.prefix[0]
        if s.suffix:
            req[(p, "last")] = s.suffix[-1]
        if s.after is not None:
            req[(p, "after")] = s.after
        if s.before is not None:
            req[(p, "before")] = s.before
    return req


def build_rule_lookup(prog: Program, report: FragmentReport | None = None) -> RuleLookup:
    report = report or classify(prog)
    if report.flags.get("dolla") and report.global_report is not None:
        mode = "profile"
        profiles = report.global_report.profiles
        orient = report.olla.orientation if report.olla else {}
        reqs = {i: _requirements_from_profile(profiles[i], orient.get(prog.rules[i].head, {})) for i in profiles}
    elif report.flags.get("dolla_plus"):
        mode = "shape"
        reqs = {i: _requirements_from_shapes(rule_shapes(r)) for i, r in enumerate(prog.rules)}
    else:
        raise UsageError("a rule lookup table needs a deterministic (DOLLA or DOLLA+) program")
    symbols: dict[str, _SymbolTable] = {}
    entries = 0
    for sym in prog.symbols:
        rules = [i for i, _ in prog.rules_for(sym) if i in reqs]
        fields = sorted({f for i in rules for f in reqs[i]}, key=repr)
        tables: dict[tuple[object, str], dict[str, int]] = {f: {} for f in fields}
        wild = {f: 0 for f in fields}
        for k, i in enumerate(rules):
            for f in fields:
                val = reqs[i].get(f)
                if val is None:
                    wild[f] |= 1 << k
                else:
                    tables[f][val] = tables[f].get(val, 0) | 1 << k
        entries += sum(len(t) + 1 for t in tables.values()) + 1
        symbols[sym] = _SymbolTable(rules, fields, tables, wild)
    return RuleLookup(mode, symbols, entries)


def consumed_positions(prog: Program, lookup: RuleLookup) -> dict[str, set[int]]:
    """Argument positions a relation needs ground before it can run: those
    the rule lookup inspects, those split by an equation, and those passed
    on to a consumed position of a body atom."""
    need: dict[str, set[int]] = {s: set() for s in prog.symbols}
    for sym, t in lookup.symbols.items():
        for k, _ in enumerate(t.rules):
            for f in t.fields:
                if not t.wild[f] >> k & 1 and isinstance(f[0], int):
                    need[sym].add(f[0])
    split: list[set[Var]] = []
    for r in prog.rules:
        own = set(r.args) | {UNIV}
        split.append({eq.lhs for eq in r.equations if any(isinstance(it, Var) and it not in own for it in eq.rhs.items)})
    changed = True
    while changed:
        changed = False
        for r, sp in zip(prog.rules, split):
            used = set(sp)
            for a in r.relation_atoms:
                used.update(a.args[p] for p in need.get(a.symbol, ()))
            for p, v in enumerate(r.args):
                if v in used and p not in need[r.head]:
                    need[r.head].add(p)
                    changed = True
    return need


# ---------------------------------------------------------------- memoized search


class MemoSolver:
    """Goal-directed least-fixpoint search over ground goals, shared across
    queries on one word."""

    def __init__(self, prog: Program, table: FactorTable, clock: _Clock | None = None):
        self.prog = prog
        self.table = table
        self.clock = clock or _Clock(Budget.from_env())
        self.proven: set = set()
        self.seen: set = set()
        self.waiting: dict = {}  # subgoal -> alternatives that need it
        self.count: list[int] = []
        self.head: list = []
        self.queue: deque = deque()
        self._matchers: dict = {}

    def holds(self, symbol: str, values: Sequence[str]) -> bool:
        goal = (symbol, tuple(values))
        self._visit(goal)
        while goal not in self.proven and self.queue:
            self._explore(self.queue.popleft())
        return goal in self.proven

    def _visit(self, goal) -> None:
        if goal not in self.seen:
            self.seen.add(goal)
            self.queue.append(goal)

    def _matcher(self, atom: DrxAtom):
        from .drx import DrxMatcher

        m = self._matchers.get(atom.regex)
        if m is None:
            m = self._matchers[atom.regex] = DrxMatcher(atom.regex)
        return m

    def alternatives(self, goal) -> Iterator[list]:
        sym, values = goal
        table = self.table
        for _, rule in self.prog.rules_for(sym):
            env: dict[Var, str] = {UNIV: table.word}
            if any(env.setdefault(v, s) != s for v, s in zip(rule.args, values)):
                continue
            for theta in match_all(rule.equations, env, table):
                self.clock.tick()
                yield from self._finish(rule, theta)

    def _finish(self, rule: Rule, theta: dict[Var, str]) -> Iterator[list]:
        pending = [a for a in rule.drx_atoms]
        free = []
        for a in pending:
            if a.var not in theta and a.var not in free:
                free.append(a.var)
        for a in rule.relation_atoms:
            for v in a.args:
                if v not in theta and v not in free:
                    free.append(v)
        for vals in itertools.product(self.table.factors, repeat=len(free)):
            env = dict(theta)
            env.update(zip(free, vals))
            if all(self._matcher(a)(env[a.var]) for a in pending):
                yield [(a.symbol, tuple(env[v] for v in a.args)) for a in rule.relation_atoms]

    def _explore(self, goal) -> None:
        for subgoals in self.alternatives(goal):
            if goal in self.proven:
                return
            need = {g for g in subgoals if g not in self.proven}
            if not need:
                self._prove(goal)
                return
            k = len(self.count)
            self.count.append(len(need))
            self.head.append(goal)
            for g in need:
                self.waiting.setdefault(g, []).append(k)
                self._visit(g)

    def _prove(self, goal) -> None:
        stack = [goal]
        while stack:
            g = stack.pop()
            if g in self.proven:
                continue
            self.proven.add(g)
            for k in self.waiting.pop(g, ()):
                self.count[k] -= 1
                if self.count[k] == 0:
                    stack.append(self.head[k])


def eval_memoized(prog: Program, w: str, *, budget: Budget | None = None) -> bool:
    if not prog.is_boolean:
        raise UsageError(f"top-down evaluation needs a Boolean program; {ANSWER} has arity {prog.arity(ANSWER)}")
    solver = MemoSolver(prog, factor_table(prog, w), _Clock(budget or Budget.from_env()))
    return solver.holds(ANSWER, ())


def eval_drx_constraint(value: str, gamma) -> bool:
    from .drx import drx_match

    return drx_match(gamma, value)


# ---------------------------------------------------------------- deterministic chain


@dataclass
class Step:
    rule: int
    depth: int
    env: dict[Var, object]


@dataclass
class EvalTrace:
    steps: list[Step] = field(default_factory=list)
    recursive_steps: int = 0
    calls: list[tuple[int, str]] = field(default_factory=list)  # (depth, symbol) of subroutine calls
    lookup_entries: int = 0
    _store: _Store | None = field(default=None, repr=False)

    @property
    def rules(self) -> list[int]:
        return [s.rule for s in self.steps if s.depth == 0]

    def to_json(self) -> dict:
        store = self._store

        def show(v) -> str | None:
            v = store.resolve(v) if store else v
            return store.text(v) if isinstance(v, tuple) else None

        return {
            "recursiveSteps": self.recursive_steps,
            "lookupEntries": self.lookup_entries,
            "steps": [
                {"rule": s.rule, "depth": s.depth, "bindings": {v.name: show(x) for v, x in s.env.items() if v != UNIV}}
                for s in self.steps
            ],
            "calls": [{"depth": d, "symbol": sym} for d, sym in self.calls],
        }


@dataclass
class EvalResult:
    accepted: bool
    trace: EvalTrace
    tier: str
    fallback: bool = False

    def __bool__(self) -> bool:
        return self.accepted


class _Fail(Exception):
    pass


class _Chain:
    def __init__(self, prog: Program, w: str, report: FragmentReport, lookup: RuleLookup, *, sd: bool, trace: bool):
        self.prog = prog
        self.store = _Store(w)
        self.report = report
        self.lookup = lookup
        self.sd = sd
        self.keep_steps = trace
        self.recursive = report.dependency.recursive_symbols()
        self.trace = EvalTrace(lookup_entries=lookup.entries, _store=self.store)
        self.applied: list[Step] = []
        self.cache: dict = {}
        self.budget = len(w) + len(prog.symbols) + 1
        self.univ: Span = (0, len(w))
        dep = report.dependency
        # the mutually recursive atom, when present, is always the tail call
        self.recursive_atom: list[RelAtom | None] = []
        for r in prog.rules:
            rec = [a for a in r.relation_atoms if dep.mutual(r.head, a.symbol)]
            self.recursive_atom.append(rec[0] if rec else None)
        self.eq_vars = [[(eq, tuple(eq.variables())) for eq in r.equations] for r in prog.rules]
        self._matchers: dict = {}
        self.inputs = consumed_positions(prog, lookup)

    # features of a head value for the lookup
    def feature(self, vals: Sequence[object]):
        store, w, n = self.store, self.store.w, self.store.n

        def get(pos, kind):
            v = store.resolve(self.univ if pos == "univ" else vals[pos])
            if isinstance(v, Cell):
                return None
            i, j = v
            if kind == "first":
                return EMPTY if i == j else w[i]
            if kind == "last":
                return EMPTY if i == j else w[j - 1]
            length = j - i
            if kind == "after":
                if i != 0 and w[i:j] != w[:length]:
                    return NOMATCH
                return END if length == n else w[length]
            if j != n and w[i:j] != w[n - length:]:
                return NOMATCH
            return START if length == n else w[n - length - 1]

        return get

    def matcher(self, atom: DrxAtom):
        from .drx import DrxMatcher

        m = self._matchers.get(atom.regex)
        if m is None:
            m = self._matchers[atom.regex] = DrxMatcher(atom.regex)
        return m

    def known(self, env, v) -> bool:
        x = env.get(v)
        return x is not None and not isinstance(self.store.resolve(x), Cell)

    def apply(self, idx: int, vals: Sequence[object], depth: int):
        """Apply rule `idx` to a configuration. Returns the continuation
        (symbol, values), None when the rule has none, or raises _Fail."""
        rule = self.prog.rules[idx]
        store = self.store
        env: dict[Var, object] = {UNIV: self.univ}
        for v, x in zip(rule.args, vals):
            if v in env:
                if not store.unify(env[v], x):
                    raise _Fail
            else:
                env[v] = x
        pending = list(self.eq_vars[idx])
        checks = list(rule.drx_atoms)
        cont = self.recursive_atom[idx]
        subs = [a for a in rule.relation_atoms if a is not cont]
        while True:
            progress = True
            while progress:
                progress = False
                for item in list(pending):
                    eq, eq_vars = item
                    unknown = {v for v in eq_vars if not self.known(env, v)}
                    if not unknown:
                        if not _verify(store, eq, env):
                            raise _Fail
                    elif len(unknown) == 1:
                        var, span = _solve(store, eq, env, unknown)
                        if span is None:
                            raise _Fail
                        if var in env:
                            store.bind(store.resolve(env[var]), span)
                        else:
                            env[var] = span
                    elif len(unknown) == 2 and len(eq.rhs.items) == 1 and isinstance(eq.rhs.items[0], Var):
                        a, b = eq.lhs, eq.rhs.items[0]
                        for v in (a, b):
                            if v not in env:
                                env[v] = store.fresh()
                        store.union(store.resolve(env[a]), store.resolve(env[b]))
                    else:
                        continue
                    pending.remove(item)
                    progress = True
                for a in list(checks):
                    if self.known(env, a.var):
                        s = store.resolve(env[a.var])
                        if not self.matcher(a)(store.text(s)):
                            raise _Fail
                        checks.remove(a)
                        progress = True
            if not subs:
                break
            if cont is None and len(subs) == 1:
                cont = subs.pop()
                break
            atom = self.next_call(subs, env)
            subs.remove(atom)
            args = []
            for v in atom.args:
                if v not in env:
                    env[v] = store.fresh()
                args.append(env[v])
            if not self.call(atom.symbol, args, depth + 1):
                raise _Fail
        if pending or checks:
            names = sorted({v.name for _, vs in pending for v in vs if not self.known(env, v)} | {a.var.name for a in checks})
            raise InsufficientInstantiation(f"rule {idx} cannot be solved top-down: {', '.join(names)} stay unbound")
        step = Step(idx, depth, env)
        self.applied.append(step)
        if self.keep_steps:
            self.trace.steps.append(step)
        if cont is None:
            return None
        args = []
        for v in cont.args:
            if v not in env:
                env[v] = store.fresh()
            args.append(env[v])
        return cont.symbol, args

    def next_call(self, subs: list[RelAtom], env: dict[Var, object]) -> RelAtom:
        """The first atom whose consumed arguments are all ground."""
        for atom in subs:
            need = self.inputs.get(atom.symbol, ())
            if all(self.known(env, atom.args[p]) for p in need):
                return atom
        return subs[0]

    def call(self, symbol: str, args: list, depth: int) -> bool:
        store = self.store
        ground = all(not isinstance(store.resolve(a), Cell) for a in args)
        key = (symbol, tuple(store.key(a) for a in args)) if ground else None
        if key is not None and key in self.cache:
            return self.cache[key]
        self.trace.calls.append((depth, symbol))
        ok = self.run(symbol, args, depth)
        if key is not None:
            self.cache[key] = ok
        return ok

    def choose(self, symbol: str, vals: list, depth: int):
        """Apply the unique applicable rule; returns (rule, continuation) or
        None when no rule applies."""
        cands = self.lookup.candidates(symbol, self.feature(vals))
        if not cands:
            return None
        if len(cands) == 1:
            try:
                return cands[0], self.apply(cands[0], vals, depth)
            except _Fail:
                return None
        if self.lookup.mode == "profile":
            raise InconsistencyError(f"rules {cands} for {symbol} all match the same ground arguments")
        store = self.store
        winners = []
        touched = False
        for idx in cands:
            mark, cells, steps, applied = len(store.trail), store.cells, len(self.trace.steps), len(self.applied)
            try:
                self.apply(idx, vals, depth)
                winners.append(idx)
            except _Fail:
                pass
            # a trial that bound an older placeholder made the choice depend on it
            touched = touched or any(c.id <= cells for _, c in store.trail[mark:])
            store.undo(mark)
            del self.trace.steps[steps:]
            del self.applied[applied:]
        if len(winners) > 1:
            if touched:
                raise InsufficientInstantiation(f"rule choice for {symbol} depends on a placeholder")
            raise InconsistencyError(f"rules {winners} for {symbol} all apply to the same ground arguments")
        if not winners:
            return None
        return winners[0], self.apply(winners[0], vals, depth)

    def run(self, symbol: str, vals: list, depth: int) -> bool:
        store = self.store
        seen: set = set()
        steps = 0
        while True:
            if not self.sd:
                key = (symbol, tuple(store.key(v) for v in vals))
                if key in seen:
                    return False
                seen.add(key)
            got = self.choose(symbol, vals, depth)
            if got is None:
                return False
            idx, cont = got
            if symbol in self.recursive:
                steps += 1
                if depth == 0:
                    self.trace.recursive_steps += 1
                if self.sd and steps > self.budget:
                    raise InconsistencyError(f"program not actually strictly decreasing: more than {self.budget} recursive steps")
            if cont is None:
                return True
            symbol, vals = cont

    def verify(self) -> None:
        store = self.store
        for step in self.applied:
            rule = self.prog.rules[step.rule]
            for v, x in step.env.items():
                if isinstance(store.resolve(x), Cell):
                    raise InconsistencyError(f"placeholder for {v} in rule {step.rule} was never grounded")
            for eq in rule.equations:
                if not _verify(store, eq, step.env):
                    raise InconsistencyError(f"equation for {eq.lhs} in rule {step.rule} fails under the final bindings")
            for a in rule.drx_atoms:
                if not self.matcher(a)(store.text(store.resolve(step.env[a.var]))):
                    raise InconsistencyError(f"regex constraint on {a.var} in rule {step.rule} fails under the final bindings")


def _check_word(prog: Program, w: str) -> None:
    if prog.declared_alphabet:
        bad = sorted({c for c in w if c not in prog.alphabet})
        if bad:
            raise InputError(f"word contains symbols outside the alphabet: {''.join(bad)!r}")


def _run_chain(prog: Program, w: str, report: FragmentReport | None, *, sd: bool, trace: bool, verify: bool) -> EvalResult:
    if not prog.is_boolean:
        raise UsageError(f"top-down evaluation needs a Boolean program; {ANSWER} has arity {prog.arity(ANSWER)}")
    _check_word(prog, w)
    report = report or classify(prog)
    allowed = ("sd-fast",) if sd else ("sd-fast", "deterministic-topdown")
    if report.tier not in allowed:
        what = "strictly decreasing deterministic" if sd else "deterministic"
        raise UsageError(f"program is classified {report.tier}; this evaluator needs a {what} program")
    lookup = build_rule_lookup(prog, report)
    chain = _Chain(prog, w, report, lookup, sd=sd, trace=trace)
    tier = "sd-fast" if sd else "deterministic-topdown"
    try:
        ok = chain.run(ANSWER, [], 0)
    except InsufficientInstantiation as e:
        warnings.warn(f"{e}; falling back to memoized search", RuntimeWarning, stacklevel=3)
        return EvalResult(eval_memoized(prog, w), chain.trace, "memoized-topdown", fallback=True)
    if ok and verify:
        chain.verify()
    return EvalResult(ok, chain.trace, tier)


def eval_deterministic(prog: Program, w: str, *, report: FragmentReport | None = None, trace: bool = True, verify: bool = True) -> EvalResult:
    return _run_chain(prog, w, report, sd=False, trace=trace, verify=verify)


def eval_sd(prog: Program, w: str, *, report: FragmentReport | None = None, trace: bool = True, verify: bool = True) -> EvalResult:
    return _run_chain(prog, w, report, sd=True, trace=trace, verify=verify)
