"""Abstract syntax for FC-Datalog, the factor universe of a word, substitutions
and satisfaction of pattern equations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence, Union

UNIVERSE = "univ"
ANSWER = "Ans"


class FcdlError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FcdlError):
    def __init__(self, message: str, diagnostics: Sequence["Diagnostic"] = ()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class InputError(FcdlError):
    """An input word contains a symbol outside the alphabet."""


class UsageError(FcdlError):
    """An operation was called outside its precondition."""


class BudgetError(FcdlError):
    """A resource guard fired; the computation was abandoned, not answered."""


class IncompleteSubstitution(FcdlError):
    pass


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    column: int

    def to_json(self) -> dict:
        return {"start": self.start, "end": self.end, "line": self.line, "column": self.column}


@dataclass(frozen=True)
class Diagnostic:
    rule: int | None
    msg: str
    span: SourceSpan | None = None

    def to_json(self) -> dict:
        return {"rule": self.rule, "span": self.span.to_json() if self.span else None, "msg": self.msg}


# ---------------------------------------------------------------- syntax tree


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    @property
    def is_universe(self) -> bool:
        return self.name == UNIVERSE

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Term:
    symbol: str

    def __str__(self) -> str:
        return repr(self.symbol)


Item = Union[Var, Term]
UNIV = Var(UNIVERSE)


@dataclass(frozen=True)
class Pattern:
    items: tuple[Item, ...] = ()

    @classmethod
    def of(cls, *parts: Item | str) -> "Pattern":
        """Build a pattern; plain strings expand to one terminal per character."""
        items: list[Item] = []
        for p in parts:
            if isinstance(p, str):
                items.extend(Term(c) for c in p)
            else:
                items.append(p)
        return cls(tuple(items))

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __add__(self, other: "Pattern") -> "Pattern":
        return Pattern(self.items + other.items)

    def variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for it in self.items:
            if isinstance(it, Var):
                seen.setdefault(it)
        return list(seen)

    def terminals(self) -> list[str]:
        return [it.symbol for it in self.items if isinstance(it, Term)]

    def is_empty(self) -> bool:
        return not self.items


@dataclass(frozen=True)
class Equation:
    lhs: Var
    rhs: Pattern

    def variables(self) -> list[Var]:
        return [self.lhs] + [v for v in self.rhs.variables() if v != self.lhs]


@dataclass(frozen=True)
class RelAtom:
    symbol: str
    args: tuple[Var, ...]

    def variables(self) -> list[Var]:
        return list(dict.fromkeys(self.args))


@dataclass(frozen=True)
class DrxAtom:
    var: Var
    regex: Any  # a syntax.Drx node; kept opaque here to avoid an import cycle

    def variables(self) -> list[Var]:
        return [self.var]


Atom = Union[Equation, RelAtom, DrxAtom]


@dataclass(frozen=True)
class Rule:
    head: str
    args: tuple[Var, ...]
    body: tuple[Atom, ...]
    span: SourceSpan | None = field(default=None, compare=False, repr=False)

    @property
    def equations(self) -> list[Equation]:
        return [a for a in self.body if isinstance(a, Equation)]

    @property
    def relation_atoms(self) -> list[RelAtom]:
        return [a for a in self.body if isinstance(a, RelAtom)]

    @property
    def drx_atoms(self) -> list[DrxAtom]:
        return [a for a in self.body if isinstance(a, DrxAtom)]

    def body_variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for atom in self.body:
            for v in atom.variables():
                seen.setdefault(v)
        return list(seen)

    def variables(self) -> list[Var]:
        seen = dict.fromkeys(self.args)
        for v in self.body_variables():
            seen.setdefault(v)
        return list(seen)


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("alphabet has duplicate symbols")
        for s in self.symbols:
            if len(s) != 1:
                raise ValidationError(f"alphabet symbol {s!r} is not a single character")

    @classmethod
    def of(cls, symbols: Iterable[str]) -> "Alphabet":
        return cls(tuple(sorted(set(symbols))))

    def __contains__(self, s: object) -> bool:
        return s in self.symbols

    def __iter__(self) -> Iterator[str]:
        return iter(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class Program:
    rules: tuple[Rule, ...]
    alphabet: Alphabet
    relations: tuple[tuple[str, int], ...]
    declared_alphabet: bool = False

    @classmethod
    def of(
        cls,
        rules: Iterable[Rule],
        alphabet: Iterable[str] | None = None,
        relations: Mapping[str, int] | None = None,
    ) -> "Program":
        """Assemble a program, inferring relation arities and, unless given,
        the alphabet. Raises ValidationError on any structural defect."""
        rules = tuple(rules)
        declared = alphabet is not None
        alpha = Alphabet.of(alphabet if declared else _terminals_of(rules))
        arities, diags = _collect_arities(rules)
        if relations is not None:
            for name, arity in arities.items():
                if name not in relations:
                    diags.append(Diagnostic(None, f"undeclared relation symbol {name}"))
                elif relations[name] != arity:
                    diags.append(Diagnostic(None, f"relation {name} declared with arity {relations[name]} but used with {arity}"))
            for name, arity in relations.items():
                arities.setdefault(name, arity)
        if diags:
            raise ValidationError(diags[0].msg, diags)
        prog = cls(rules, alpha, tuple(sorted(arities.items())), declared)
        report = validate_program(prog)
        if not report.ok:
            raise ValidationError(report.errors[0].msg, report.errors)
        return prog

    @property
    def universe_var(self) -> Var:
        return UNIV

    def arity(self, symbol: str) -> int:
        return dict(self.relations)[symbol]

    @property
    def symbols(self) -> list[str]:
        return [name for name, _ in self.relations]

    def rules_for(self, symbol: str) -> list[tuple[int, Rule]]:
        return [(i, r) for i, r in enumerate(self.rules) if r.head == symbol]

    @property
    def is_boolean(self) -> bool:
        return self.arity(ANSWER) == 0

    def with_rules(self, rules: Iterable[Rule]) -> "Program":
        return Program(tuple(rules), self.alphabet, self.relations, self.declared_alphabet)


def _terminals_of(rules: Iterable[Rule]) -> set[str]:
    out: set[str] = set()
    for r in rules:
        for eq in r.equations:
            out.update(eq.rhs.terminals())
    return out


def _collect_arities(rules: Iterable[Rule]) -> tuple[dict[str, int], list[Diagnostic]]:
    arities: dict[str, int] = {}
    diags: list[Diagnostic] = []
    for i, r in enumerate(rules):
        for sym, n in [(r.head, len(r.args))] + [(a.symbol, len(a.args)) for a in r.relation_atoms]:
            if arities.setdefault(sym, n) != n:
                diags.append(Diagnostic(i, f"arity mismatch for {sym}: {arities[sym]} vs {n}", r.span))
    return arities, diags


@dataclass
class ValidationReport:
    errors: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_program(prog: Program) -> ValidationReport:
    errors: list[Diagnostic] = []
    arities = dict(prog.relations)
    for i, r in enumerate(prog.rules):
        if not r.body:
            errors.append(Diagnostic(i, "rule body is empty", r.span))
            continue
        body_vars = set(r.body_variables())
        for x in r.args:
            if x not in body_vars:
                errors.append(Diagnostic(i, f"head variable {x} not in body", r.span))
        for sym, n in [(r.head, len(r.args))] + [(a.symbol, len(a.args)) for a in r.relation_atoms]:
            if sym not in arities:
                errors.append(Diagnostic(i, f"undeclared relation symbol {sym}", r.span))
            elif arities[sym] != n:
                errors.append(Diagnostic(i, f"arity mismatch for {sym}", r.span))
        for eq in r.equations:
            if eq.lhs in eq.rhs.variables():
                errors.append(Diagnostic(i, f"equation for {eq.lhs} mentions {eq.lhs} on its right side; not normalizable", r.span))
            if prog.declared_alphabet:
                for t in eq.rhs.terminals():
                    if t not in prog.alphabet:
                        errors.append(Diagnostic(i, f"terminal {t!r} outside the declared alphabet", r.span))
    if ANSWER not in arities or not any(r.head == ANSWER for r in prog.rules):
        errors.append(Diagnostic(None, "program has no rule for Ans"))
    return ValidationReport(errors)


# ---------------------------------------------------------------- universe


class FactorTable:
    """All distinct factors of a word, with ids ordered by (length, text)."""

    def __init__(self, word: str, factors: Sequence[str]):
        self.word = word
        self.factors: tuple[str, ...] = tuple(factors)
        self._index = {f: i for i, f in enumerate(self.factors)}
        self._first_of_length: list[int] = []
        for i, f in enumerate(self.factors):
            while len(self._first_of_length) <= len(f):
                self._first_of_length.append(i)

    def __len__(self) -> int:
        return len(self.factors)

    def __contains__(self, s: object) -> bool:
        return s in self._index

    def __iter__(self) -> Iterator[str]:
        return iter(self.factors)

    def id(self, s: str) -> int:
        return self._index[s]

    def get_id(self, s: str) -> int | None:
        return self._index.get(s)

    def text(self, i: int) -> str:
        return self.factors[i]

    def at_least(self, length: int) -> Sequence[str]:
        """Factors of length >= `length`, shortest first."""
        if length >= len(self._first_of_length):
            return ()
        return self.factors[self._first_of_length[max(length, 0)]:]


def intern_factors(w: str, alphabet: Iterable[str] | None = None) -> FactorTable:
    if alphabet is not None:
        allowed = set(alphabet)
        bad = sorted({c for c in w if c not in allowed})
        if bad:
            raise InputError(f"word contains symbols outside the alphabet: {''.join(bad)!r}")
    n = len(w)
    found = {w[i:j] for i in range(n) for j in range(i + 1, n + 1)}
    found.add("")
    return FactorTable(w, sorted(found, key=lambda f: (len(f), f)))


class Substitution(Mapping[Var, int]):
    """Immutable partial map from variables to factor ids of one table."""

    __slots__ = ("_b", "table", "_hash")

    def __init__(self, bindings: Mapping[Var, int] | None = None, table: FactorTable | None = None):
        self._b = dict(bindings or {})
        self.table = table
        self._hash: int | None = None

    @classmethod
    def from_text(cls, table: FactorTable, values: Mapping[Var, str]) -> "Substitution":
        return cls({v: table.id(s) for v, s in values.items()}, table)

    def __getitem__(self, v: Var) -> int:
        return self._b[v]

    def __iter__(self) -> Iterator[Var]:
        return iter(self._b)

    def __len__(self) -> int:
        return len(self._b)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._b.items()))
        return self._hash

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Substitution):
            return self._b == other._b
        return NotImplemented

    def __repr__(self) -> str:
        if self.table is None:
            return f"Substitution({self._b})"
        return "Substitution({" + ", ".join(f"{v}: {self.table.text(i)!r}" for v, i in self._b.items()) + "})"

    def text(self, v: Var) -> str:
        if self.table is None:
            raise UsageError("substitution has no factor table attached")
        return self.table.text(self._b[v])

    def as_text(self) -> dict[Var, str]:
        return {v: self.text(v) for v in self._b}

    def bind(self, v: Var, fid: int) -> "Substitution":
        b = dict(self._b)
        b[v] = fid
        return Substitution(b, self.table)


def apply_substitution(p: Pattern, theta: Mapping[Var, int] | Mapping[Var, str], table: FactorTable | None = None) -> str:
    """Image of a pattern. Values may be factor ids (resolved through the
    substitution's table or `table`) or plain strings."""
    tab = table if table is not None else getattr(theta, "table", None)
    out: list[str] = []
    for it in p.items:
        if isinstance(it, Term):
            out.append(it.symbol)
            continue
        if it not in theta:
            raise IncompleteSubstitution(f"variable {it} is unbound")
        val = theta[it]
        if isinstance(val, int):
            if tab is None:
                raise UsageError("factor ids need a factor table")
            val = tab.text(val)
        out.append(val)
    return "".join(out)


def match_equation(eq: Equation, theta: Substitution, table: FactorTable) -> set[Substitution]:
    """All extensions of `theta` that bind every variable of `eq` and satisfy it."""
    env = {v: table.text(i) for v, i in theta.items()}
    if UNIV in env and env[UNIV] != table.word:
        return set()
    out: set[Substitution] = set()
    for ext in match_text(eq, env, table):
        b = dict(theta.items())
        for v, s in ext.items():
            b[v] = table.id(s)
        out.add(Substitution(b, table))
    return out


def match_text(eq: Equation, env: Mapping[Var, str], table: FactorTable) -> Iterator[dict[Var, str]]:
    """String-level worker for match_equation: yields the new bindings only.
    The universe variable is treated as bound to the word."""
    if UNIV not in env:
        env = dict(env)
        env[UNIV] = table.word
        extra = {UNIV: table.word}
    else:
        extra = {}
    items = eq.rhs.items
    if eq.lhs in env:
        for ext in _split(env[eq.lhs], items, env):
            ext.update(extra)
            yield ext
        return
    free = [v for v in eq.rhs.variables() if v not in env]
    if not free:
        val = "".join(it.symbol if isinstance(it, Term) else env[it] for it in items)
        if val in table:
            yield {eq.lhs: val, **extra}
        return
    fixed = sum(1 if isinstance(it, Term) else len(env[it]) for it in items if isinstance(it, Term) or it in env)
    for cand in table.at_least(fixed):
        for ext in _split(cand, items, env):
            ext[eq.lhs] = cand
            ext.update(extra)
            yield ext


def _split(s: str, items: Sequence[Item], env: Mapping[Var, str]) -> Iterator[dict[Var, str]]:
    """Ways to read `s` as the concatenation of `items` (split-point search)."""
    n = len(items)
    min_rest = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        it = items[i]
        if isinstance(it, Term):
            min_rest[i] = min_rest[i + 1] + 1
        elif it in env:
            min_rest[i] = min_rest[i + 1] + len(env[it])
        else:
            min_rest[i] = min_rest[i + 1]
    new: dict[Var, str] = {}
    total = len(s)

    def rec(i: int, pos: int) -> Iterator[dict[Var, str]]:
        if i == n:
            if pos == total:
                yield dict(new)
            return
        it = items[i]
        if isinstance(it, Term):
            if s.startswith(it.symbol, pos):
                yield from rec(i + 1, pos + 1)
            return
        val = env.get(it)
        if val is None:
            val = new.get(it)
        if val is not None:
            if s.startswith(val, pos):
                yield from rec(i + 1, pos + len(val))
            return
        room = total - pos - min_rest[i + 1]
        lengths: Iterable[int] = range(room + 1)
        later = [x for x in items[i + 1:] if isinstance(x, Var) and x not in env]
        if all(x == it for x in later):
            # the only unknown left: its length is pinned
            k = 1 + len(later)
            rest_fixed = min_rest[i + 1]
            span = total - pos - rest_fixed
            if span < 0 or span % k:
                return
            lengths = (span // k,)
        for length in lengths:
            new[it] = s[pos:pos + length]
            yield from rec(i + 1, pos + length)
        new.pop(it, None)

    yield from rec(0, 0)


def match_all(equations: Sequence[Equation], env: Mapping[Var, str], table: FactorTable) -> Iterator[dict[Var, str]]:
    """Every extension of `env` satisfying all `equations` (a conjunction).
    Equations are taken most-constrained first: a bound left side, then the
    fewest unknowns."""
    env = dict(env)
    env.setdefault(UNIV, table.word)
    if env[UNIV] != table.word:
        return
    yield from _match_all(list(equations), env, table)


def _match_all(pending: list[Equation], env: dict[Var, str], table: FactorTable) -> Iterator[dict[Var, str]]:
    if not pending:
        yield dict(env)
        return

    def cost(eq: Equation) -> tuple[int, int]:
        unknown = sum(1 for v in eq.variables() if v not in env)
        return (0 if eq.lhs in env else 1, unknown) if unknown else (-1, 0)

    best = min(range(len(pending)), key=lambda i: cost(pending[i]))
    eq = pending[best]
    rest = pending[:best] + pending[best + 1:]
    for ext in match_text(eq, env, table):
        added = [v for v in ext if v not in env]
        for v in added:
            env[v] = ext[v]
        yield from _match_all(rest, env, table)
        for v in added:
            del env[v]
