"""Text formats: the program grammar, deterministic-regex syntax, and JSON
descriptions of multi-head automata and Turing machines."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .core import (
    ANSWER,
    UNIVERSE,
    DrxAtom,
    Equation,
    FcdlError,
    Pattern,
    Program,
    RelAtom,
    Rule,
    SourceSpan,
    Term,
    ValidationError,
    Var,
)


class ParseError(FcdlError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{message} at line {span.line}, column {span.column}")
        self.message = message
        self.span = span


def _span(text: str, start: int, end: int) -> SourceSpan:
    start = max(0, min(start, len(text)))
    end = max(start, min(end, len(text)))
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(start, end, line, col)


# ---------------------------------------------------------------- regex AST


@dataclass(frozen=True)
class Terminal:
    symbol: str


@dataclass(frozen=True)
class Concat:
    children: tuple


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Plus:
    child: object


@dataclass(frozen=True)
class Star:
    child: object


@dataclass(frozen=True)
class Bind:
    memory: str
    child: object


@dataclass(frozen=True)
class Recall:
    memory: str


Drx = Terminal | Concat | Union | Plus | Star | Bind | Recall

_DRX_SPECIAL = set("|()<>+*&:'/\\")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _DrxParser:
    def __init__(self, text: str, outer: str | None = None, offset: int = 0):
        self.text = text
        self.pos = 0
        self.outer = outer if outer is not None else text
        self.offset = offset

    def error(self, msg: str, start: int | None = None, end: int | None = None) -> ParseError:
        s = self.pos if start is None else start
        e = s + 1 if end is None else end
        return ParseError(msg, _span(self.outer, self.offset + s, self.offset + e))

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str | None:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else None

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def parse(self) -> Drx:
        node = self.alt()
        if self.peek() is not None:
            raise self.error(f"unexpected {self.text[self.pos]!r}")
        return node

    def alt(self) -> Drx:
        node = self.cat()
        while self.peek() == "|":
            self.pos += 1
            node = Union(node, self.cat())
        return node

    def cat(self) -> Drx:
        parts = []
        while (c := self.peek()) is not None and c not in "|)>":
            parts.append(self.postfix())
        if not parts:
            raise self.error("empty expression")
        return parts[0] if len(parts) == 1 else Concat(tuple(parts))

    def postfix(self) -> Drx:
        node = self.atom()
        while (c := self.peek()) in ("+", "*"):
            self.pos += 1
            node = Plus(node) if c == "+" else Star(node)
        return node

    def ident(self) -> str:
        self.skip()
        m = _IDENT.match(self.text, self.pos)
        if not m:
            raise self.error("expected a memory name")
        self.pos = m.end()
        return m.group()

    def atom(self) -> Drx:
        c = self.peek()
        start = self.pos
        if c == "(":
            self.pos += 1
            node = self.alt()
            self.expect(")")
            return node
        if c == "<":
            self.pos += 1
            name = self.ident()
            self.expect(":")
            node = self.alt()
            self.expect(">")
            return Bind(name, node)
        if c == "&":
            self.pos += 1
            return Recall(self.ident())
        if c == "'":
            if self.pos + 2 < len(self.text) and self.text[self.pos + 2] == "'":
                sym = self.text[self.pos + 1]
                self.pos += 3
                return Terminal(sym)
            raise self.error("quoted terminal must hold exactly one character", start, start + 1)
        if c is None or c in _DRX_SPECIAL:
            raise self.error("expected a terminal, group, bind or recall")
        self.pos += 1
        return Terminal(c)


def parse_drx(text: str, *, _outer: str | None = None, _offset: int = 0) -> Drx:
    p = _DrxParser(text, _outer, _offset)
    node = p.parse()
    problem = drx_normalization_problem(node)
    if problem:
        raise ParseError(problem, _span(p.outer, _offset, _offset + len(text)))
    return node


def drx_memories(node: Drx) -> list[str]:
    out: dict[str, None] = {}
    for n in drx_walk(node):
        if isinstance(n, (Bind, Recall)):
            out.setdefault(n.memory)
    return list(out)


def drx_walk(node: Drx) -> Iterator[Drx]:
    yield node
    if isinstance(node, Concat):
        for c in node.children:
            yield from drx_walk(c)
    elif isinstance(node, Union):
        yield from drx_walk(node.left)
        yield from drx_walk(node.right)
    elif isinstance(node, (Plus, Star, Bind)):
        yield from drx_walk(node.child)


def drx_normalization_problem(node: Drx) -> str | None:
    """Reason the expression is ill-formed, or None."""
    bound = {n.memory for n in drx_walk(node) if isinstance(n, Bind)}
    for n in drx_walk(node):
        if isinstance(n, Recall) and n.memory not in bound:
            return f"recall &{n.memory} of a memory that is never bound"
        if isinstance(n, Bind):
            for inner in drx_walk(n.child):
                if isinstance(inner, Bind) and inner.memory == n.memory:
                    return f"memory {n.memory} is bound inside its own binding"
                if isinstance(inner, Recall) and inner.memory == n.memory:
                    return f"memory {n.memory} is recalled inside its own binding"

    # a recall must have some bind of its memory that can run before it
    def flow(n: Drx, before: frozenset) -> tuple[frozenset, str | None]:
        if isinstance(n, Terminal):
            return before, None
        if isinstance(n, Recall):
            if n.memory not in before:
                return before, f"recall &{n.memory} can never follow a binding of {n.memory}"
            return before, None
        if isinstance(n, Bind):
            after, err = flow(n.child, before)
            return after | {n.memory}, err
        if isinstance(n, Concat):
            cur = before
            for c in n.children:
                cur, err = flow(c, cur)
                if err:
                    return cur, err
            return cur, None
        if isinstance(n, Union):
            a, err = flow(n.left, before)
            if err:
                return a, err
            b, err = flow(n.right, before)
            return a | b, err
        # Plus / Star: a later iteration sees bindings of an earlier one
        once, _ = flow(n.child, before)
        return flow(n.child, once)

    return flow(node, frozenset())[1]


_PREC = {Union: 0, Concat: 1, Plus: 2, Star: 2, Terminal: 3, Recall: 3, Bind: 3}


def print_drx(node: Drx) -> str:
    def go(n: Drx, need: int) -> str:
        if isinstance(n, Terminal):
            s = n.symbol if (n.symbol not in _DRX_SPECIAL and not n.symbol.isspace()) else f"'{n.symbol}'"
        elif isinstance(n, Recall):
            s = f"&{n.memory}"
        elif isinstance(n, Bind):
            s = f"<{n.memory}:{go(n.child, 0)}>"
        elif isinstance(n, Union):
            s = f"{go(n.left, 0)}|{go(n.right, 1)}"
        elif isinstance(n, Concat):
            s = " ".join(go(c, 2) for c in n.children)
        elif isinstance(n, Plus):
            s = go(n.child, 3) + "+"
        else:
            s = go(n.child, 3) + "*"
        return f"({s})" if _PREC[type(n)] < need else s

    return go(node, 0)


# ---------------------------------------------------------------- program text


@dataclass
class _Tok:
    kind: str  # IDENT STRING DSTRING SYM DRX EOF
    text: str
    start: int
    end: int


_PUNCT = ("<-", "(", ")", ",", ".", "=")


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c == "#":
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if c in "'\"":
            j = text.find(c, i + 1)
            nl = text.find("\n", i + 1)
            if j < 0 or (0 <= nl < j):
                raise ParseError("unterminated string", _span(text, i, i + 1))
            toks.append(_Tok("STRING" if c == "'" else "DSTRING", text[i + 1:j], i, j + 1))
            i = j + 1
            continue
        if c == "/":
            j = text.find("/", i + 1)
            if j < 0:
                raise ParseError("unterminated regex", _span(text, i, i + 1))
            toks.append(_Tok("DRX", text[i + 1:j], i, j + 1))
            i = j + 1
            continue
        m = _IDENT.match(text, i)
        if m:
            toks.append(_Tok("IDENT", m.group(), i, m.end()))
            i = m.end()
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(_Tok("SYM", p, i, i + len(p)))
                i += len(p)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", _span(text, i, i + 1))
    toks.append(_Tok("EOF", "", n, n))
    return toks


class _ProgramParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, _span(self.text, t.start, max(t.end, t.start + 1)))

    def eat(self, kind: str, text: str | None = None) -> _Tok:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind.lower()
            got = t.text if t.kind != "EOF" else "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        self.i += 1
        return t

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def var(self) -> Var:
        t = self.eat("IDENT")
        if not (t.text[0].islower() or t.text[0] == "_") or t.text in ("in", "alphabet"):
            raise self.error(f"expected a variable, found {t.text!r}", t)
        return Var(t.text)

    def rel(self) -> _Tok:
        t = self.eat("IDENT")
        if not t.text[0].isupper():
            raise self.error(f"expected a relation symbol, found {t.text!r}", t)
        return t

    def args(self) -> tuple[Var, ...]:
        self.eat("SYM", "(")
        out: list[Var] = []
        if not self.at("SYM", ")"):
            out.append(self.var())
            while self.at("SYM", ","):
                self.i += 1
                out.append(self.var())
        self.eat("SYM", ")")
        return tuple(out)

    def parse(self) -> tuple[list[Rule], str | None]:
        alphabet = None
        if self.at("IDENT", "alphabet"):
            self.i += 1
            alphabet = self.eat("DSTRING").text
            self.eat("SYM", ".")
        rules = []
        while not self.at("EOF"):
            rules.append(self.rule())
        if not rules:
            raise self.error("program has no rules")
        return rules, alphabet

    def rule(self) -> Rule:
        start = self.tok.start
        head = self.rel()
        args = self.args()
        self.eat("SYM", "<-")
        body = [self.atom()]
        while self.at("SYM", ","):
            self.i += 1
            body.append(self.atom())
        end = self.eat("SYM", ".").end
        return Rule(head.text, args, tuple(body), _span(self.text, start, end))

    def atom(self):
        t = self.tok
        if t.kind == "IDENT" and t.text[0].isupper():
            self.i += 1
            return RelAtom(t.text, self.args())
        v = self.var()
        if self.at("IDENT", "in"):
            self.i += 1
            d = self.eat("DRX")
            return DrxAtom(v, parse_drx(d.text, _outer=self.text, _offset=d.start + 1))
        self.eat("SYM", "=")
        items: list = []
        while self.tok.kind in ("IDENT", "STRING"):
            if self.tok.kind == "STRING":
                items.extend(Term(c) for c in self.tok.text)
                self.i += 1
            else:
                items.append(self.var())
        if not self.at("SYM", ",") and not self.at("SYM", "."):
            raise self.error("expected ',' or '.' after pattern")
        return Equation(v, Pattern(tuple(items)))


def parse_program(text: str) -> Program:
    """Parse and validate program text. Raises ParseError (with a span) for
    lexical, syntactic and validation problems."""
    parser = _ProgramParser(text)
    rules, alphabet = parser.parse()
    try:
        return Program.of(rules, alphabet=alphabet)
    except ValidationError as e:
        d = e.diagnostics[0] if e.diagnostics else None
        span = d.span if d and d.span else _span(text, 0, len(text))
        raise ParseError(str(e), span) from e


def _print_pattern(p: Pattern) -> str:
    if p.is_empty():
        return "''"
    out: list[str] = []
    run: list[str] = []
    for it in p.items:
        if isinstance(it, Term):
            run.append(it.symbol)
            continue
        if run:
            out.append("'" + "".join(run) + "'")
            run = []
        out.append(it.name)
    if run:
        out.append("'" + "".join(run) + "'")
    return " ".join(out)


def print_atom(a) -> str:
    if isinstance(a, Equation):
        return f"{a.lhs} = {_print_pattern(a.rhs)}"
    if isinstance(a, RelAtom):
        return f"{a.symbol}({', '.join(v.name for v in a.args)})"
    return f"{a.var} in /{print_drx(a.regex)}/"


def print_rule(r: Rule) -> str:
    head = f"{r.head}({', '.join(v.name for v in r.args)})"
    return f"{head} <- {', '.join(print_atom(a) for a in r.body)}."


def print_program(prog: Program) -> str:
    lines = []
    if prog.declared_alphabet:
        lines.append(f'alphabet "{"".join(prog.alphabet.symbols)}".')
    lines.extend(print_rule(r) for r in prog.rules)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- automata


LEFT_END = "<"
RIGHT_END = ">"


@dataclass(frozen=True)
class MultiHeadAutomaton:
    states: tuple[str, ...]
    k: int
    alphabet: tuple[str, ...]
    head_selector: Mapping[str, int]
    transitions: Mapping[tuple[str, str], frozenset]  # (state, symbol) -> {(next, move)}
    start: str
    accept: str

    @property
    def deterministic(self) -> bool:
        return all(len(v) <= 1 for v in self.transitions.values())

    def moves(self, state: str, symbol: str) -> frozenset:
        return self.transitions.get((state, symbol), frozenset())

    def to_json(self) -> dict:
        trans = [
            {"from": s, "symbol": sym, "to": t, "move": m}
            for (s, sym), targets in sorted(self.transitions.items())
            for t, m in sorted(targets)
        ]
        return {
            "states": list(self.states), "k": self.k, "alphabet": list(self.alphabet),
            "headSelector": dict(self.head_selector), "transitions": trans,
            "start": self.start, "accept": self.accept,
        }


class SpecError(FcdlError):
    """Malformed automaton or Turing machine description."""


def _load(json_text: str | dict) -> dict:
    if isinstance(json_text, dict):
        return json_text
    try:
        data = json.loads(json_text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", _span(json_text, e.pos, e.pos + 1)) from e
    if not isinstance(data, dict):
        raise SpecError("top-level JSON value must be an object")
    return data


def parse_automaton(json_text: str | dict) -> MultiHeadAutomaton:
    d = _load(json_text)
    try:
        states = tuple(d["states"])
        k = int(d["k"])
        alphabet = tuple(d["alphabet"])
        selector = {str(s): int(h) for s, h in d["headSelector"].items()}
        start, accept = d["start"], d["accept"]
        raw = d["transitions"]
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"automaton description is missing or mistypes a field: {e}") from e
    if k < 1:
        raise SpecError("an automaton needs at least one head")
    for a in alphabet:
        if not isinstance(a, str) or len(a) != 1 or a in (LEFT_END, RIGHT_END):
            raise SpecError(f"bad alphabet symbol {a!r}")
    known = set(states)
    for s in (start, accept):
        if s not in known:
            raise SpecError(f"unknown state {s!r}")
    for s in states:
        if s not in selector:
            raise SpecError(f"state {s!r} has no head selector entry")
        if not 0 <= selector[s] < k:
            raise SpecError(f"head selector for {s!r} is out of range")
    trans: dict[tuple[str, str], set] = {}
    for t in raw:
        src, sym, dst, move = t["from"], t["symbol"], t["to"], int(t["move"])
        if src not in known or dst not in known:
            raise SpecError(f"transition references an unknown state: {t}")
        if sym not in alphabet and sym not in (LEFT_END, RIGHT_END):
            raise SpecError(f"transition reads an unknown symbol {sym!r}")
        if move not in (-1, 0, 1):
            raise SpecError(f"move must be -1, 0 or 1: {t}")
        if sym == LEFT_END and move < 0:
            raise SpecError("a head cannot move left off the left endmarker")
        if sym == RIGHT_END and move > 0:
            raise SpecError("a head cannot move right off the right endmarker")
        trans.setdefault((src, sym), set()).add((dst, move))
    return MultiHeadAutomaton(
        states, k, alphabet, selector, {key: frozenset(v) for key, v in trans.items()}, start, accept
    )


@dataclass(frozen=True)
class TuringSpec:
    states: tuple[str, ...]
    tape: tuple[str, ...]
    blank: str
    delta: Mapping[tuple[str, str], tuple[str, str, str]] = field(hash=False)
    start: str
    omega: str

    def to_json(self) -> dict:
        return {
            "states": list(self.states), "tape": list(self.tape), "blank": self.blank,
            "delta": [
                {"state": q, "read": r, "to": t, "write": w, "move": m}
                for (q, r), (t, w, m) in sorted(self.delta.items())
            ],
            "start": self.start, "omega": self.omega,
        }


def parse_turing(json_text: str | dict) -> TuringSpec:
    d = _load(json_text)
    try:
        states = tuple(d["states"])
        tape = tuple(d["tape"])
        blank = d["blank"]
        start = d["start"]
        raw = d["delta"]
    except (KeyError, TypeError) as e:
        raise SpecError(f"machine description is missing a field: {e}") from e
    omega = d.get("omega")
    if omega is None or omega not in states:
        raise SpecError("machine has no accepting state omega among its states")
    if start not in states:
        raise SpecError(f"unknown start state {start!r}")
    if blank not in tape:
        raise SpecError("blank symbol is not in the tape alphabet")
    delta: dict[tuple[str, str], tuple[str, str, str]] = {}
    for t in raw:
        key = (t["state"], t["read"])
        if t["state"] not in states or t["to"] not in states:
            raise SpecError(f"transition references an unknown state: {t}")
        if t["read"] not in tape or t["write"] not in tape:
            raise SpecError(f"transition uses a symbol outside the tape alphabet: {t}")
        if t["move"] not in ("L", "R"):
            raise SpecError(f"move must be 'L' or 'R': {t}")
        if key in delta:
            raise SpecError(f"two transitions for state {key[0]!r} reading {key[1]!r}; machine must be deterministic")
        delta[key] = (t["to"], t["write"], t["move"])
    return TuringSpec(states, tape, blank, delta, start, omega)


__all__ = [
    "ANSWER", "UNIVERSE", "ParseError", "SpecError", "parse_program", "print_program", "print_rule",
    "print_atom", "parse_drx", "print_drx", "parse_automaton", "parse_turing", "MultiHeadAutomaton",
    "TuringSpec", "Terminal", "Concat", "Union", "Plus", "Star", "Bind", "Recall", "Drx",
    "LEFT_END", "RIGHT_END", "drx_memories", "drx_walk",
]
