"""Deterministic regex with back-references: position automaton, determinism
check, single-pass matcher, backtracking oracle and the two compilers into
deterministic one-letter-lookahead programs."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .core import UNIV, Alphabet, Equation, Pattern, Program, RelAtom, Rule, Term, UsageError, Var
from .syntax import Bind, Concat, Drx, Plus, Recall, Star, Terminal, Union, drx_memories, drx_walk, parse_drx

START = 0


@dataclass(frozen=True)
class Position:
    index: int
    kind: str  # "letter" | "recall"
    value: str
    binds: tuple[str, ...]  # memories whose Bind encloses this position, outermost first

    def __str__(self) -> str:
        return self.value if self.kind == "letter" else "&" + self.value


@dataclass
class _Info:
    nullable: bool
    first: dict[int, frozenset[str]]
    last: dict[int, frozenset[str]]
    null_resets: frozenset[str]


@dataclass
class PositionAutomaton:
    """Glushkov automaton over letter and recall positions.

    Every transition carries the set of memories it resets: memories whose
    Bind is entered on the way to the target, or skipped as empty."""

    positions: list[Position]  # index 0 unused; positions are 1-based
    nullable: bool
    first: dict[int, frozenset[str]]
    last: set[int]
    follow: dict[int, dict[int, set[frozenset[str]]]]
    memories: list[str]

    @property
    def n(self) -> int:
        return len(self.positions) - 1

    @property
    def k(self) -> int:
        return len(self.memories)

    def successors(self, p: int) -> dict[int, set[frozenset[str]]]:
        if p == START:
            return {q: {r} for q, r in self.first.items()}
        return self.follow.get(p, {})

    def accepting(self, p: int) -> bool:
        return self.nullable if p == START else p in self.last


def drx_position_automaton(gamma: Drx | str) -> PositionAutomaton:
    if isinstance(gamma, str):
        gamma = parse_drx(gamma)
    positions: list[Position] = [Position(0, "start", "", ())]
    follow: dict[int, dict[int, set[frozenset[str]]]] = {}

    def link(p: int, q: int, resets: frozenset[str]) -> None:
        follow.setdefault(p, {}).setdefault(q, set()).add(resets)

    def seq(a: _Info, b: _Info) -> _Info:
        for p, tail in a.last.items():
            for q, head in b.first.items():
                link(p, q, tail | head)
        first = dict(a.first)
        if a.nullable:
            first.update({q: a.null_resets | r for q, r in b.first.items()})
        last = dict(b.last)
        if b.nullable:
            last.update({p: r | b.null_resets for p, r in a.last.items()})
        return _Info(a.nullable and b.nullable, first, last, a.null_resets | b.null_resets)

    def loop(c: _Info) -> None:
        for p, tail in c.last.items():
            for q, head in c.first.items():
                link(p, q, tail | head)

    def build(node: Drx, binds: tuple[str, ...]) -> _Info:
        if isinstance(node, (Terminal, Recall)):
            kind, value = ("letter", node.symbol) if isinstance(node, Terminal) else ("recall", node.memory)
            q = len(positions)
            positions.append(Position(q, kind, value, binds))
            return _Info(False, {q: frozenset()}, {q: frozenset()}, frozenset())
        if isinstance(node, Concat):
            acc = _Info(True, {}, {}, frozenset())
            for child in node.children:
                acc = seq(acc, build(child, binds))
            return acc
        if isinstance(node, Union):
            left, right = build(node.left, binds), build(node.right, binds)
            if left.nullable and right.nullable:
                nr = left.null_resets | right.null_resets
            else:
                nr = left.null_resets if left.nullable else right.null_resets
            return _Info(left.nullable or right.nullable, {**left.first, **right.first}, {**left.last, **right.last}, nr)
        if isinstance(node, Star):
            c = build(node.child, binds)
            loop(c)
            return _Info(True, c.first, c.last, frozenset())
        if isinstance(node, Plus):
            c = build(node.child, binds)
            loop(c)
            return c
        if isinstance(node, Bind):
            c = build(node.child, binds + (node.memory,))
            entered = frozenset({node.memory})
            return _Info(c.nullable, {q: r | entered for q, r in c.first.items()}, c.last, c.null_resets | entered)
        raise TypeError(f"not a regex node: {node!r}")

    info = build(gamma, ())
    return PositionAutomaton(positions, info.nullable, info.first, set(info.last), follow, drx_memories(gamma))


@dataclass
class DeterminismReport:
    flag: bool
    diagnostics: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.flag


def drx_check_deterministic(gamma: Drx | str | PositionAutomaton) -> DeterminismReport:
    """Conservative check: letters are pairwise distinct in the first set and
    in every follow set, and a recall is never in a set with anything else.
    Being able to stop (an accepting position, or a nullable expression at
    the start) counts as a member of the set."""
    pa = gamma if isinstance(gamma, PositionAutomaton) else drx_position_automaton(gamma)
    diags: list[str] = []
    for p in range(pa.n + 1):
        succ = pa.successors(p)
        where = "at the start" if p == START else f"after {pa.positions[p]} (position {p})"
        members = sum(len(v) for v in succ.values()) + (1 if pa.accepting(p) else 0)
        seen: dict[str, int] = {}
        for q, variants in succ.items():
            pos = pa.positions[q]
            if len(variants) > 1:
                diags.append(f"{where}: position {q} is reachable with different memory resets")
            if pos.kind == "recall":
                if members > 1:
                    diags.append(f"{where}: recall &{pos.value} competes with other choices")
                continue
            for _ in variants:
                if pos.value in seen:
                    diags.append(f"{where}: letter {pos.value} leads to positions {seen[pos.value]} and {q}")
                seen[pos.value] = q
    return DeterminismReport(not diags, diags)


def _require_deterministic(pa: PositionAutomaton) -> None:
    det = drx_check_deterministic(pa)
    if not det.flag:
        raise UsageError("regex is not deterministic: " + "; ".join(det.diagnostics))


class DrxMatcher:
    """Reusable single-pass matcher for one deterministic regex."""

    def __init__(self, gamma: Drx | str):
        self.automaton = drx_position_automaton(gamma)
        _require_deterministic(self.automaton)
        # per state: letter -> (target, resets) and the lone recall, if any
        self._letters: dict[int, dict[str, tuple[int, frozenset[str]]]] = {}
        self._recall: dict[int, tuple[int, frozenset[str]]] = {}
        pa = self.automaton
        for p in range(pa.n + 1):
            table: dict[str, tuple[int, frozenset[str]]] = {}
            for q, variants in pa.successors(p).items():
                (resets,) = variants
                if pa.positions[q].kind == "recall":
                    self._recall[p] = (q, resets)
                else:
                    table[pa.positions[q].value] = (q, resets)
            self._letters[p] = table

    def __call__(self, w: str) -> bool:
        pa = self.automaton
        mem: dict[str, str] = {}
        state, i = START, 0
        while True:
            if i == len(w) and state not in self._recall:
                return pa.accepting(state)
            if state in self._recall:
                q, resets = self._recall[state]
                for m in resets:
                    mem[m] = ""
                content = mem.get(pa.positions[q].value, "")
                if not w.startswith(content, i):
                    return False
                i += len(content)
                piece = content
            else:
                step = self._letters[state].get(w[i])
                if step is None:
                    return False
                q, resets = step
                for m in resets:
                    mem[m] = ""
                piece = w[i]
                i += 1
            for m in pa.positions[q].binds:
                mem[m] = mem.get(m, "") + piece
            state = q


def drx_match(gamma: Drx | str, w: str) -> bool:
    return DrxMatcher(gamma)(w)


def drx_match_bruteforce(gamma: Drx | str, w: str, *, max_len: int = 12) -> bool:
    """Backtracking over every parse; memories hold the text their Bind last
    matched and are empty until then."""
    if len(w) > max_len:
        raise UsageError(f"word of length {len(w)} exceeds the oracle bound {max_len}")
    if isinstance(gamma, str):
        gamma = parse_drx(gamma)

    def run(node: Drx, i: int, mem: dict[str, str]) -> Iterator[tuple[int, dict[str, str]]]:
        if isinstance(node, Terminal):
            if w.startswith(node.symbol, i):
                yield i + 1, mem
        elif isinstance(node, Recall):
            content = mem.get(node.memory, "")
            if w.startswith(content, i):
                yield i + len(content), mem
        elif isinstance(node, Concat):
            yield from chain(node.children, 0, i, mem)
        elif isinstance(node, Union):
            yield from run(node.left, i, mem)
            yield from run(node.right, i, mem)
        elif isinstance(node, Star):
            yield i, mem
            yield from repeat(node.child, i, mem)
        elif isinstance(node, Plus):
            for j, m2 in run(node.child, i, mem):
                yield j, m2
                if j > i:
                    yield from repeat(node.child, j, m2)
        elif isinstance(node, Bind):
            for j, m2 in run(node.child, i, mem):
                yield j, {**m2, node.memory: w[i:j]}
        else:
            raise TypeError(f"not a regex node: {node!r}")

    def chain(children: tuple, k: int, i: int, mem: dict[str, str]) -> Iterator[tuple[int, dict[str, str]]]:
        if k == len(children):
            yield i, mem
            return
        for j, m2 in run(children[k], i, mem):
            yield from chain(children, k + 1, j, m2)

    def repeat(child: Drx, i: int, mem: dict[str, str]) -> Iterator[tuple[int, dict[str, str]]]:
        # one or more iterations, each consuming at least one letter
        for j, m2 in run(child, i, mem):
            if j > i:
                yield j, m2
                yield from repeat(child, j, m2)

    return any(j == len(w) for j, _ in run(gamma, 0, {}))


# ---------------------------------------------------------------- compilers


@dataclass
class CompileStats:
    k: int
    n: int
    rules: int
    symbols: int
    bound_rules: int
    bound_symbols: int

    @property
    def within_bounds(self) -> bool:
        return self.rules <= self.bound_rules and self.symbols <= self.bound_symbols

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "rules": self.rules,
            "symbols": self.symbols,
            "boundRules": self.bound_rules,
            "boundSymbols": self.bound_symbols,
        }


def _check_compilable(gamma: Drx, pa: PositionAutomaton) -> None:
    _require_deterministic(pa)
    counts: dict[str, int] = {}
    for node in drx_walk(gamma):
        if isinstance(node, Bind):
            counts[node.memory] = counts.get(node.memory, 0) + 1
        if isinstance(node, (Star, Plus)):
            inner = [b.memory for b in drx_walk(node.child) if isinstance(b, Bind)]
            if inner:
                raise UsageError(f"memory {inner[0]} is bound inside a repetition; rebinding is not supported by the compilers")
    again = [m for m, c in counts.items() if c > 1]
    if again:
        raise UsageError(f"memory {again[0]} is bound more than once; rebinding is not supported by the compilers")


def _recalled(pa: PositionAutomaton) -> list[str]:
    used = {p.value for p in pa.positions[1:] if p.kind == "recall"}
    return [m for m in pa.memories if m in used]


def _state(i: int) -> str:
    return f"Q{i}"


def _compile(gamma: Drx | str, alphabet: Alphabet | str | None, plus: bool) -> tuple[Program, CompileStats]:
    if isinstance(gamma, str):
        gamma = parse_drx(gamma)
    pa = drx_position_automaton(gamma)
    _check_compilable(gamma, pa)
    letters = sorted({p.value for p in pa.positions[1:] if p.kind == "letter"})
    if alphabet is None:
        sigma = Alphabet.of(letters) if letters else None
    else:
        sigma = alphabet if isinstance(alphabet, Alphabet) else Alphabet.of(alphabet)
        stray = [a for a in letters if a not in sigma]
        if stray:
            raise UsageError(f"regex letter {stray[0]} is not in the alphabet")
    sigma_letters = list(sigma) if sigma is not None else []
    # memories that are never recalled carry no information and are dropped
    mems = _recalled(pa)
    slot = {m: i for i, m in enumerate(mems)}
    u, v = Var("u"), Var("v")
    xs = [Var(f"x{i + 1}") for i in range(len(mems))]  # memory contents in the head
    ys = [Var(f"y{i + 1}") for i in range(len(mems))]  # memory contents handed to the callee
    rules: list[Rule] = []
    helpers: dict[int, str] = {}  # number of open memories -> helper symbol

    def helper(ell: int) -> str:
        if ell not in helpers:
            helpers[ell] = f"R{ell}"
        return helpers[ell]

    if not plus:
        for pos in pa.positions[1:]:
            if pos.kind == "recall":
                helper(sum(1 for m in pos.binds if m in slot))
    init_x = [Var(f"z{i + 1}") for i in range(len(mems))]
    p0 = Var("p")
    rules.append(
        Rule(
            "Ans",
            (),
            (RelAtom(_state(0), (p0, *init_x)), Equation(p0, Pattern((UNIV,))))
            + tuple(Equation(z, Pattern(())) for z in init_x),
        )
    )
    for p in range(pa.n + 1):
        for q, variants in sorted(pa.successors(p).items()):
            pos = pa.positions[q]
            opened = [slot[m] for m in pos.binds if m in slot]
            body_mem = [ys[i] if i in opened else xs[i] for i in range(len(mems))]
            callee = RelAtom(_state(q), (v, *body_mem))
            if pos.kind == "letter":
                a = Term(pos.value)
                eqs = [Equation(u, Pattern((a, v)))]
                eqs += [Equation(ys[i], Pattern((xs[i], a))) for i in opened]
                rules.append(Rule(_state(p), (u, *xs), (callee, *eqs)))
            elif plus:
                n_var = xs[slot[pos.value]]
                eqs = [Equation(u, Pattern((n_var, v)))]
                eqs += [Equation(ys[i], Pattern((xs[i], n_var))) for i in opened]
                rules.append(Rule(_state(p), (u, *xs), (callee, *eqs)))
            else:
                n_var = xs[slot[pos.value]]
                args = [u, v, n_var]
                for i in opened:
                    args += [xs[i], ys[i]]
                rules.append(Rule(_state(p), (u, *xs), (callee, RelAtom(helper(len(opened)), tuple(args)))))
        if pa.accepting(p):
            body: list = [Equation(u, Pattern(()))]
            if plus:
                body += [Equation(Var(f"c{i + 1}"), Pattern((x,))) for i, x in enumerate(xs)]
            elif xs:
                # the memory contents are unconstrained at the end; a helper
                # atom that holds for any value keeps them range restricted
                ell = min(helpers) if helpers else None
                if ell is None:
                    raise UsageError("internal: memories without a recall survived")
                for x in xs:
                    body.append(RelAtom(helpers[ell], (x, u, x) + (u, x) * ell))
            rules.append(Rule(_state(p), (u, *xs), tuple(body)))
    if not plus:
        for ell, sym in sorted(helpers.items()):
            rest, nxt, keep = Var("r"), Var("s"), Var("t")
            acc = [(Var(f"a{i + 1}"), Var(f"b{i + 1}"), Var(f"e{i + 1}")) for i in range(ell)]
            head = (u, v, keep) + tuple(x for cur, fin, _ in acc for x in (cur, fin))
            for a in sigma_letters:
                t = Term(a)
                eqs = [Equation(keep, Pattern((t, nxt))), Equation(u, Pattern((t, rest)))]
                eqs += [Equation(ext, Pattern((cur, t))) for cur, _, ext in acc]
                args = (rest, v, nxt) + tuple(x for _, fin, ext in acc for x in (ext, fin))
                rules.append(Rule(sym, head, (*eqs, RelAtom(sym, args))))
            base = [Equation(keep, Pattern(())), Equation(u, Pattern((v,)))]
            base += [Equation(cur, Pattern((fin,))) for cur, fin, _ in acc]
            rules.append(Rule(sym, head, tuple(base)))
    prog = Program.of(rules, alphabet=sigma)
    n, k = pa.n, len(pa.memories)
    if plus:
        bound_rules, bound_symbols = n * (n + 3) + 1, n + 2
    else:
        bound_rules, bound_symbols = k * (len(sigma_letters) + 1) + n * (n + 3) + 1, k + n + 2
    stats = CompileStats(k, n, len(rules), len(prog.symbols), bound_rules, bound_symbols)
    return prog, stats


def compile_drx_dolla(gamma: Drx | str, alphabet: Alphabet | str | None = None) -> tuple[Program, CompileStats]:
    """Letter-by-letter program; recalls are replayed through helper
    relations that copy the memory one letter at a time."""
    return _compile(gamma, alphabet, plus=False)


def compile_drx_dollaplus(gamma: Drx | str, alphabet: Alphabet | str | None = None) -> tuple[Program, CompileStats]:
    """Recalls become one equation on the whole memory content."""
    return _compile(gamma, alphabet, plus=True)
