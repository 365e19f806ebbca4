"""Fragment classification: dependency structure, linearity, one-letter
lookahead shape, determinism (syntactic and brute force), uniquely defined
variables, strict decrease and regex-constraint placement."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx

from .core import (
    UNIV,
    Diagnostic,
    DrxAtom,
    Equation,
    Program,
    RelAtom,
    Rule,
    Term,
    UsageError,
    Var,
    intern_factors,
    match_all,
)

EMPTY = ""  # profile value for x = ''
END = "<end>"  # nothing follows the variable in the word
START = "<start>"  # nothing precedes the variable in the word

TIERS = ("sd-fast", "deterministic-topdown", "memoized-topdown", "fixpoint")


@dataclass
class Verdict:
    flag: bool
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.flag


def _diag(prog: Program, i: int | None, msg: str) -> Diagnostic:
    return Diagnostic(i, msg, prog.rules[i].span if i is not None else None)


# ---------------------------------------------------------------- dependencies


class DependencyInfo:
    def __init__(self, prog: Program):
        self.graph = nx.DiGraph()
        self.graph.add_nodes_from(prog.symbols)
        for r in prog.rules:
            for a in r.relation_atoms:
                self.graph.add_edge(r.head, a.symbol)
        self.components: list[frozenset[str]] = [frozenset(c) for c in nx.strongly_connected_components(self.graph)]
        self._comp = {s: i for i, c in enumerate(self.components) for s in c}
        self._recursive = {
            s for s in self.graph if len(self.components[self._comp[s]]) > 1 or self.graph.has_edge(s, s)
        }

    def edges(self) -> set[tuple[str, str]]:
        return set(self.graph.edges)

    def mutual(self, a: str, b: str) -> bool:
        """True iff a reaches b and b reaches a through at least one edge."""
        return self._comp.get(a) == self._comp.get(b) and a in self._recursive

    def recursive_symbols(self) -> set[str]:
        return set(self._recursive)

    def component(self, s: str) -> frozenset[str]:
        return self.components[self._comp[s]]


def dependency_info(prog: Program) -> DependencyInfo:
    return DependencyInfo(prog)


def recursive_atoms(rule: Rule, dep: DependencyInfo) -> list[RelAtom]:
    return [a for a in rule.relation_atoms if dep.mutual(rule.head, a.symbol)]


def check_linear(prog: Program, dep: DependencyInfo | None = None) -> Verdict:
    dep = dep or dependency_info(prog)
    diags = [
        _diag(prog, i, f"rule has {n} body atoms mutually recursive with {r.head}")
        for i, r in enumerate(prog.rules)
        if (n := len(recursive_atoms(r, dep))) > 1
    ]
    return Verdict(not diags, diags)


@dataclass(frozen=True)
class TopBottom:
    top: tuple[Var, ...]
    bottom: tuple[Var, ...]
    recursive_atom: RelAtom | None

    @property
    def top_set(self) -> frozenset[Var]:
        return frozenset(self.top)


def top_bottom(rule: Rule, dep: DependencyInfo) -> TopBottom:
    rec = recursive_atoms(rule, dep)
    if len(rec) > 1:
        raise UsageError("top/bottom variables are defined for linear rules only")
    top = tuple(rule.args) + (UNIV,)
    if rec:
        return TopBottom(top, rec[0].args, rec[0])
    return TopBottom(top, (), None)


def lower_variables(rule: Rule, tb: TopBottom) -> frozenset[Var]:
    """Variables handed downwards: the recursive atom's arguments, or, for a
    rule without one, the arguments of its other relation atoms."""
    if tb.recursive_atom is not None:
        return frozenset(tb.bottom)
    return frozenset(v for a in rule.relation_atoms for v in a.args)


def subroutine_variables(rule: Rule, tb: TopBottom) -> frozenset[Var]:
    return frozenset(v for a in rule.relation_atoms if a is not tb.recursive_atom for v in a.args)


# ---------------------------------------------------------------- OLLA shapes


@dataclass(frozen=True)
class EqForm:
    """Shape label of one pattern equation inside an OLLA rule.

    kind: empty | lower-empty | alias | delete | add | look-after | look-before
    var: the top variable the equation constrains; other: the partner variable
    letter: the single terminal, or None for the letter-free variant
    side: 'left' / 'right' for lettered forms, None otherwise
    """

    kind: str
    var: Var
    other: Var | None = None
    letter: str | None = None
    side: str | None = None

    @property
    def epsilon(self) -> bool:
        return self.letter is None


def _occurrences(rule: Rule) -> dict[Var, int]:
    counts: dict[Var, int] = {}
    for v in rule.args:
        counts[v] = counts.get(v, 0) + 1
    for a in rule.body:
        if isinstance(a, Equation):
            vs = [a.lhs] + [it for it in a.rhs.items if isinstance(it, Var)]
        elif isinstance(a, RelAtom):
            vs = list(a.args)
        else:
            vs = [a.var]
        for v in vs:
            counts[v] = counts.get(v, 0) + 1
    return counts


def equation_form(eq: Equation, rule: Rule, tb: TopBottom) -> EqForm | None:
    top = tb.top_set
    low = lower_variables(rule, tb)
    lhs, items = eq.lhs, eq.rhs.items
    if not items:
        if lhs in top:
            return EqForm("empty", lhs)
        if lhs in low:
            return EqForm("lower-empty", lhs)
        return None
    if len(items) == 1 and isinstance(items[0], Var):
        v = items[0]
        if lhs in top and v in top:
            return EqForm("alias", lhs, v)
        if lhs in top and v in low:
            return EqForm("delete", lhs, v)
        if lhs in low and v in top:
            return EqForm("add", v, lhs)
    if len(items) == 2:
        a, b = items
        if isinstance(a, Var) and isinstance(b, Term):
            v, letter, side = a, b.symbol, "right"
        elif isinstance(a, Term) and isinstance(b, Var):
            v, letter, side = b, a.symbol, "left"
        else:
            v = None
        if v is not None:
            if lhs in top and v in low:
                return EqForm("delete", lhs, v, letter, side)
            if lhs in low and v in top:
                return EqForm("add", v, lhs, letter, side)
    if lhs == UNIV:
        counts = _occurrences(rule)

        def fresh(z: object) -> bool:
            return isinstance(z, Var) and z not in top and z not in low and counts.get(z, 0) == 1

        if len(items) in (2, 3) and all(isinstance(it, Var) for it in (items[0], items[-1])):
            mid = items[1] if len(items) == 3 else None
            if mid is None or isinstance(mid, Term):
                letter = mid.symbol if mid is not None else None
                first, last = items[0], items[-1]
                if first in top and fresh(last):
                    return EqForm("look-after", first, last, letter, "right" if letter else None)
                if last in top and fresh(first):
                    return EqForm("look-before", last, first, letter, "left" if letter else None)
    return None


def _positions(rule: Rule) -> dict[Var, list[object]]:
    """Head positions (ints) of each top variable, with 'univ' for the universe."""
    pos: dict[Var, list[object]] = {}
    for i, v in enumerate(rule.args):
        pos.setdefault(v, []).append(i)
    pos.setdefault(UNIV, []).append("univ")
    return pos


@dataclass
class OllaReport:
    flag: bool
    guarded: bool
    forms: dict[int, list[EqForm | None]]
    orientation: dict[str, dict[object, str]]
    diagnostics: list[Diagnostic]

    def __bool__(self) -> bool:
        return self.flag


def classify_olla(prog: Program, dep: DependencyInfo | None = None) -> OllaReport:
    dep = dep or dependency_info(prog)
    diags: list[Diagnostic] = []
    if not check_linear(prog, dep):
        diags.append(Diagnostic(None, "program is not linear"))
        return OllaReport(False, False, {}, {}, diags)
    forms: dict[int, list[EqForm | None]] = {}
    orient: dict[str, dict[object, str]] = {}
    ok, guarded = True, True
    for i, r in enumerate(prog.rules):
        tb = top_bottom(r, dep)
        fs = [equation_form(eq, r, tb) for eq in r.equations]
        forms[i] = fs
        for eq, f in zip(r.equations, fs):
            if f is None:
                ok = False
                diags.append(_diag(prog, i, f"equation for {eq.lhs} fits no one-letter-lookahead form"))
        # one variable may not be read from both ends
        local: dict[Var, str] = {}
        pos = _positions(r)
        for f in fs:
            if f is None or f.side is None:
                continue
            for v in (f.var, f.other):
                if v is None or (f.kind.startswith("look") and v is f.other):
                    continue
                if local.setdefault(v, f.side) != f.side:
                    ok = False
                    diags.append(_diag(prog, i, f"variable {v} is used on both its left and right end"))
                for p in pos.get(v, []):
                    seen = orient.setdefault(r.head, {})
                    if seen.setdefault(p, f.side) != f.side:
                        ok = False
                        diags.append(_diag(prog, i, f"argument {p} of {r.head} is read from the left in one rule and the right in another"))
        # x = x' between top variables needs a guard
        n_rules = len(prog.rules_for(r.head))
        has_guard = any(f is not None and (f.kind == "empty" or (f.kind == "delete" and f.letter)) for f in fs)
        for f in fs:
            if f is not None and f.kind == "alias" and n_rules > 1 and not has_guard and UNIV not in (f.var, f.other):
                guarded = False
                diags.append(_diag(prog, i, f"unguarded equation {f.var} = {f.other}"))
    return OllaReport(ok, guarded and ok, forms, orient, diags)


# ---------------------------------------------------------------- determinism for OLLA


@dataclass
class Profile:
    """Per head position: the letter (or '' for empty) the rule forces on the
    consumed end, and the letters seen just after / just before the value."""

    base: dict[object, str | None]
    after: dict[object, str | None]
    before: dict[object, str | None]

    def conflicts(self, other: "Profile") -> bool:
        for mine, theirs in ((self.base, other.base), (self.after, other.after), (self.before, other.before)):
            for p, a in mine.items():
                b = theirs.get(p)
                if values_conflict(a, b):
                    return True
        return False


def values_conflict(a: str | None, b: str | None) -> bool:
    return a is not None and b is not None and a != b


class _Classes:
    """Union-find over variables, used for alias closure."""

    def __init__(self) -> None:
        self.parent: dict[Var, Var] = {}

    def find(self, v: Var) -> Var:
        self.parent.setdefault(v, v)
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def union(self, a: Var, b: Var) -> None:
        self.parent[self.find(a)] = self.find(b)


def _rule_constraints(forms: Iterable[EqForm | None]) -> tuple[dict, bool]:
    """Constraints per alias class; second value is True when contradictory."""
    forms = [f for f in forms if f is not None]
    classes = _Classes()
    for f in forms:
        if f.kind == "alias" and f.other is not None:
            classes.union(f.var, f.other)
    cons: dict[Var, dict[str, set]] = {}
    for f in forms:
        c = cons.setdefault(classes.find(f.var), {"base": set(), "after": set(), "before": set()})
        if f.kind == "empty":
            c["base"].add(EMPTY)
        elif f.kind == "delete" and f.letter:
            c["base"].add((f.side, f.letter))
        elif f.kind == "look-after" and f.letter:
            c["after"].add(f.letter)
        elif f.kind == "look-before" and f.letter:
            c["before"].add(f.letter)
        elif f.kind == "alias" and UNIV in (f.var, f.other):
            c["after"].add(END)
            c["before"].add(START)
    bad = False
    for c in cons.values():
        base = c["base"]
        if EMPTY in base and len(base) > 1:
            bad = True
        for side in ("left", "right"):
            if len({l for s, l in (x for x in base if x != EMPTY) if s == side}) > 1:
                bad = True
        if len(c["after"]) > 1 or len(c["before"]) > 1:
            bad = True
    return cons, bad


def inert_rules(prog: Program, olla: OllaReport) -> set[int]:
    return {i for i, fs in olla.forms.items() if _rule_constraints(fs)[1]}


def rule_profile(rule: Rule, forms: list[EqForm | None]) -> Profile:
    pos = _positions(rule)
    base: dict[object, str | None] = {}
    after: dict[object, str | None] = {}
    before: dict[object, str | None] = {}
    for f in forms:
        if f is None:
            continue
        targets = pos.get(f.var, [])
        if f.kind == "empty":
            val, table = EMPTY, base
        elif f.kind == "delete" and f.letter:
            val, table = f.letter, base
        elif f.kind == "look-after" and f.letter:
            val, table = f.letter, after
        elif f.kind == "look-before" and f.letter:
            val, table = f.letter, before
        elif f.kind == "alias" and UNIV in (f.var, f.other):
            v = f.other if f.var == UNIV else f.var
            for p in pos.get(v, []):
                after[p] = END
                before[p] = START
            continue
        else:
            continue
        for p in targets:
            table[p] = val
    return Profile(base, after, before)


@dataclass
class GlobalReport:
    flag: bool
    profiles: dict[int, Profile]
    conflicts: dict[tuple[int, int], bool]
    diagnostics: list[Diagnostic]

    def __bool__(self) -> bool:
        return self.flag


def profiles_and_global_determinism(prog: Program, olla: OllaReport | None = None) -> GlobalReport:
    olla = olla or classify_olla(prog)
    diags: list[Diagnostic] = []
    if not olla.flag:
        return GlobalReport(False, {}, {}, [Diagnostic(None, "program is not OLLA")])
    inert = inert_rules(prog, olla)
    profiles = {i: rule_profile(r, olla.forms[i]) for i, r in enumerate(prog.rules) if i not in inert}
    matrix: dict[tuple[int, int], bool] = {}
    ok = olla.guarded
    if not olla.guarded:
        diags.append(Diagnostic(None, "program is not guarded"))
    for sym in prog.symbols:
        idx = [i for i, _ in prog.rules_for(sym) if i not in inert]
        for a, b in itertools.combinations(idx, 2):
            c = profiles[a].conflicts(profiles[b])
            matrix[(a, b)] = matrix[(b, a)] = c
            if not c:
                ok = False
                diags.append(_diag(prog, b, f"rules {a} and {b} for {sym} have non-conflicting profiles"))
    return GlobalReport(ok, profiles, matrix, diags)


def local_determinism_olla(prog: Program, olla: OllaReport | None = None, dep: DependencyInfo | None = None) -> Verdict:
    dep = dep or dependency_info(prog)
    olla = olla or classify_olla(prog, dep)
    if not olla.flag:
        return Verdict(False, [Diagnostic(None, "program is not OLLA")])
    inert = inert_rules(prog, olla)
    diags = []
    for i, r in enumerate(prog.rules):
        if i in inert:
            continue
        tb = top_bottom(r, dep)
        in_eq = {v for eq in r.equations for v in eq.variables()}
        sub = subroutine_variables(r, tb)
        for x in tb.top:
            if x != UNIV and x not in in_eq and x not in tb.bottom and x not in sub:
                diags.append(_diag(prog, i, f"top variable {x} is unconstrained"))
        for y in tb.bottom:
            if y not in in_eq and y not in tb.top_set and y not in sub:
                diags.append(_diag(prog, i, f"bottom variable {y} is unconstrained"))
    return Verdict(not diags, diags)


# ---------------------------------------------------------------- uniquely defined


@dataclass
class UniqueReport:
    flag: bool
    defined: set[Var]
    order: list[Var]
    rounds: int


def uniquely_defined(rule: Rule, tb: TopBottom | None = None) -> UniqueReport:
    top = set(tb.top) if tb else set(rule.args) | {UNIV}
    defined = set(top) | {UNIV}
    order: list[Var] = []
    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for eq in rule.equations:
            unknown = [v for v in eq.variables() if v not in defined]
            if len(unknown) == 1:
                defined.add(unknown[0])
                order.append(unknown[0])
                changed = True
    return UniqueReport(all(v in defined for v in rule.variables()), defined, order, rounds)


@dataclass
class Shape:
    """What the equations of a rule force on one top value."""

    prefix: str = ""
    suffix: str = ""
    min_len: int = 0
    exact: int | None = None
    after: str | None = None
    before: str | None = None

    def conflicts(self, o: "Shape") -> bool:
        if self.exact is not None and o.exact is not None and self.exact != o.exact:
            return True
        if self.exact is not None and self.exact < o.min_len:
            return True
        if o.exact is not None and o.exact < self.min_len:
            return True
        m = min(len(self.prefix), len(o.prefix))
        if self.prefix[:m] != o.prefix[:m]:
            return True
        m = min(len(self.suffix), len(o.suffix))
        if m and self.suffix[-m:] != o.suffix[-m:]:
            return True
        return values_conflict(self.after, o.after) or values_conflict(self.before, o.before)


def rule_shapes(rule: Rule) -> dict[object, Shape]:
    pos = _positions(rule)
    shapes: dict[object, Shape] = {}
    tops = set(pos)
    for eq in rule.equations:
        items = eq.rhs.items
        if eq.lhs in tops:
            lead = "".join(itertools.takewhile(lambda s: True, (it.symbol for it in itertools.takewhile(lambda it: isinstance(it, Term), items))))
            trail = "".join(it.symbol for it in reversed(list(itertools.takewhile(lambda it: isinstance(it, Term), reversed(items)))))
            n_terms = sum(1 for it in items if isinstance(it, Term))
            exact = n_terms if n_terms == len(items) else None
            for p in pos[eq.lhs]:
                s = shapes.setdefault(p, Shape())
                if len(lead) > len(s.prefix):
                    s.prefix = lead
                if len(trail) > len(s.suffix):
                    s.suffix = trail
                s.min_len = max(s.min_len, n_terms)
                if exact is not None:
                    s.exact = exact
            if len(items) == 1 and items[0] == UNIV:
                for p in pos[eq.lhs]:
                    shapes[p].after, shapes[p].before = END, START
        if eq.lhs == UNIV and len(items) in (2, 3):
            first, last = items[0], items[-1]
            mid = items[1] if len(items) == 3 else None
            if isinstance(mid, Term) and isinstance(first, Var) and isinstance(last, Var):
                counts = _occurrences(rule)
                if first in tops and counts.get(last) == 1 and last not in tops:
                    for p in pos[first]:
                        shapes.setdefault(p, Shape()).after = mid.symbol
                elif last in tops and counts.get(first) == 1 and first not in tops:
                    for p in pos[last]:
                        shapes.setdefault(p, Shape()).before = mid.symbol
    return shapes


def shapes_conflict(a: dict[object, Shape], b: dict[object, Shape]) -> bool:
    return any(p in b and s.conflicts(b[p]) for p, s in a.items())


@dataclass
class DollaPlusReport:
    flag: bool
    uniquely_defined_all: bool
    globally_deterministic: bool
    diagnostics: list[Diagnostic]

    def __bool__(self) -> bool:
        return self.flag


def check_dolla_plus(prog: Program, dep: DependencyInfo | None = None) -> DollaPlusReport:
    dep = dep or dependency_info(prog)
    diags: list[Diagnostic] = []
    if not check_linear(prog, dep):
        return DollaPlusReport(False, False, False, [Diagnostic(None, "program is not linear")])
    unique = True
    for i, r in enumerate(prog.rules):
        rep = uniquely_defined(r, top_bottom(r, dep))
        if not rep.flag:
            unique = False
            missing = sorted(v.name for v in r.variables() if v not in rep.defined)
            diags.append(_diag(prog, i, f"variables not uniquely defined: {', '.join(missing)}"))
    det = True
    for sym in prog.symbols:
        rules = prog.rules_for(sym)
        if len(rules) < 2:
            continue
        shapes = {i: rule_shapes(r) for i, r in rules}
        for (a, _), (b, _) in itertools.combinations(rules, 2):
            if not shapes_conflict(shapes[a], shapes[b]):
                det = False
                diags.append(_diag(prog, b, f"cannot prove rules {a} and {b} for {sym} disjoint"))
    return DollaPlusReport(unique and det, unique, det, diags)


# ---------------------------------------------------------------- strict decrease


@dataclass
class SdReport:
    flag: bool
    positions: dict[str, int]
    evidence: dict[int, tuple[Var, Var]]
    diagnostics: list[Diagnostic]

    def __bool__(self) -> bool:
        return self.flag


def decreasing_pairs(rule: Rule, tb: TopBottom) -> list[tuple[int, int, Var, Var]]:
    """(head position, body position, x, y) with |y| < |x| forced syntactically."""
    if tb.recursive_atom is None:
        return []
    out = []
    for eq in rule.equations:
        x = eq.lhs
        if x not in rule.args:
            continue
        if not any(isinstance(it, Term) for it in eq.rhs.items):
            continue
        for y in eq.rhs.variables():
            for p, hv in enumerate(rule.args):
                if hv != x:
                    continue
                for q, bv in enumerate(tb.bottom):
                    if bv == y:
                        out.append((p, q, x, y))
    return out


def check_strictly_decreasing(prog: Program, dep: DependencyInfo | None = None, *, require_fragment: bool = True) -> SdReport:
    """Sound syntactic test: each recursive symbol gets one argument position
    that every recursive rule shrinks by at least one terminal and passes on in
    the same position of the callee. Rules with a recursive atom but no such
    equation make the test fail."""
    dep = dep or dependency_info(prog)
    if not check_linear(prog, dep):
        return SdReport(False, {}, {}, [Diagnostic(None, "program is not linear")])
    if require_fragment:
        olla = classify_olla(prog, dep)
        dolla = olla.flag and local_determinism_olla(prog, olla, dep).flag and profiles_and_global_determinism(prog, olla).flag
        if not dolla and not check_dolla_plus(prog, dep).flag:
            return SdReport(False, {}, {}, [Diagnostic(None, "strict decrease is only assessed for DOLLA or DOLLA+ programs")])
    steps: list[tuple[int, str, str, list[tuple[int, int, Var, Var]]]] = []
    diags: list[Diagnostic] = []
    for i, r in enumerate(prog.rules):
        tb = top_bottom(r, dep)
        if tb.recursive_atom is None:
            continue
        pairs = decreasing_pairs(r, tb)
        if not pairs:
            diags.append(_diag(prog, i, "recursive rule has no equation that shrinks an argument"))
        steps.append((i, r.head, tb.recursive_atom.symbol, pairs))
    if diags:
        return SdReport(False, {}, {}, diags)
    domain = {s: set(range(prog.arity(s))) for _, s, t, _ in steps for s in (s, t)}
    # arc consistency, then backtracking over what is left
    changed = True
    while changed:
        changed = False
        for _, head, callee, pairs in steps:
            keep = {p for p in domain[head] if any(pp == p and q in domain[callee] for pp, q, _, _ in pairs)}
            if keep != domain[head]:
                domain[head] = keep
                changed = True
    symbols = sorted(domain)
    if any(not domain[s] for s in symbols):
        return SdReport(False, {}, {}, [Diagnostic(None, "no consistent decreasing argument for " + ", ".join(s for s in symbols if not domain[s]))])

    def consistent(assign: dict[str, int]) -> bool:
        for _, head, callee, pairs in steps:
            if head in assign and callee in assign:
                if not any(p == assign[head] and q == assign[callee] for p, q, _, _ in pairs):
                    return False
        return True

    def search(k: int, assign: dict[str, int]) -> dict[str, int] | None:
        if k == len(symbols):
            return dict(assign)
        for p in sorted(domain[symbols[k]]):
            assign[symbols[k]] = p
            if consistent(assign):
                got = search(k + 1, assign)
                if got is not None:
                    return got
            del assign[symbols[k]]
        return None

    found = search(0, {})
    if found is None:
        return SdReport(False, {}, {}, [Diagnostic(None, "decreasing arguments cannot be aligned across recursive calls")])
    evidence = {}
    for i, head, callee, pairs in steps:
        for p, q, x, y in pairs:
            if p == found[head] and q == found[callee]:
                evidence[i] = (x, y)
                break
    return SdReport(True, found, evidence, [])


# ---------------------------------------------------------------- brute-force oracle


@dataclass
class SemanticDetReport:
    word: str
    relations: dict[int, set[tuple[tuple[str, ...], tuple[str, ...]]]]
    partial: dict[int, bool]
    overlaps: list[tuple[int, int, tuple[str, ...]]]

    @property
    def locally_deterministic(self) -> bool:
        return all(self.partial.values())

    @property
    def globally_deterministic(self) -> bool:
        return not self.overlaps


def rule_relation(rule: Rule, tb: TopBottom, w: str, table=None) -> set[tuple[tuple[str, ...], tuple[str, ...]]]:
    """The set of (top tuple, bottom tuple) pairs over all satisfying
    substitutions of the rule's pattern equations."""
    table = table or intern_factors(w)
    wanted = list(dict.fromkeys(list(tb.top) + list(tb.bottom)))
    out = set()
    for env in match_all(rule.equations, {UNIV: w}, table):
        free = [v for v in wanted if v not in env]
        for values in itertools.product(table.factors, repeat=len(free)):
            full = dict(env)
            full.update(zip(free, values))
            out.add((tuple(full[v] for v in tb.top), tuple(full[v] for v in tb.bottom)))
    return out


def semantic_determinism_oracle(prog: Program, w: str, *, max_len: int = 8) -> SemanticDetReport:
    if len(w) > max_len:
        raise UsageError(f"word of length {len(w)} exceeds the brute-force bound {max_len}; raise max_len explicitly if needed")
    dep = dependency_info(prog)
    if not check_linear(prog, dep):
        raise UsageError("the determinism oracle needs a linear program")
    table = intern_factors(w)
    rels = {i: rule_relation(r, top_bottom(r, dep), w, table) for i, r in enumerate(prog.rules)}
    partial = {}
    for i, rel in rels.items():
        seen: dict[tuple[str, ...], tuple[str, ...]] = {}
        partial[i] = all(seen.setdefault(t, b) == b for t, b in rel)
    overlaps = []
    for sym in prog.symbols:
        idx = [i for i, _ in prog.rules_for(sym)]
        for a, b in itertools.combinations(idx, 2):
            shared = {t for t, _ in rels[a]} & {t for t, _ in rels[b]}
            for t in sorted(shared)[:1]:
                overlaps.append((a, b, t))
    return SemanticDetReport(w, rels, partial, overlaps)


# ---------------------------------------------------------------- regex constraints


def check_drx_constraints(prog: Program) -> Verdict:
    from .drx import drx_check_deterministic

    diags = []
    for i, r in enumerate(prog.rules):
        for a in r.drx_atoms:
            if len(prog.rules_for(r.head)) != 1:
                diags.append(_diag(prog, i, f"regex constraint in a rule for {r.head}, which has more than one rule"))
            det = drx_check_deterministic(a.regex)
            if not det.flag:
                diags.append(_diag(prog, i, "regex constraint is not deterministic: " + "; ".join(det.diagnostics)))
    return Verdict(not diags, diags)


# ---------------------------------------------------------------- report


@dataclass
class FragmentReport:
    flags: dict[str, bool]
    tier: str
    diagnostics: list[tuple[str, Diagnostic]]
    olla: OllaReport | None = None
    global_report: GlobalReport | None = None
    sd: SdReport | None = None
    dependency: DependencyInfo | None = None

    def to_json(self) -> dict:
        return {
            "flags": dict(self.flags),
            "tier": self.tier,
            "diagnostics": [dict(d.to_json(), flag=f) for f, d in self.diagnostics],
        }


def classify(prog: Program) -> FragmentReport:
    dep = dependency_info(prog)
    diags: list[tuple[str, Diagnostic]] = []

    def note(name: str, v) -> bool:
        diags.extend((name, d) for d in getattr(v, "diagnostics", []))
        return bool(v.flag)

    linear = note("linear", check_linear(prog, dep))
    drx_ok = note("drx_constraints_legal", check_drx_constraints(prog))
    flags = {"valid": True, "linear": linear}
    olla = glob = sd = None
    if linear:
        olla = classify_olla(prog, dep)
        flags["olla"] = note("olla", olla)
        flags["guarded"] = olla.guarded
        if olla.flag:
            loc = local_determinism_olla(prog, olla, dep)
            glob = profiles_and_global_determinism(prog, olla)
            flags["locally_deterministic"] = note("locally_deterministic", loc)
            flags["globally_deterministic"] = note("globally_deterministic", glob)
        else:
            flags["locally_deterministic"] = flags["globally_deterministic"] = False
        plus = check_dolla_plus(prog, dep)
        note("dolla_plus", plus)
        flags["dolla"] = flags["olla"] and flags["guarded"] and flags["locally_deterministic"] and flags["globally_deterministic"]
        flags["uniquely_defined_all"] = plus.uniquely_defined_all
        flags["dolla_plus"] = plus.flag
        if flags["dolla"] or flags["dolla_plus"]:
            sd = check_strictly_decreasing(prog, dep, require_fragment=False)
            flags["strictly_decreasing"] = note("strictly_decreasing", sd)
        else:
            flags["strictly_decreasing"] = False
    else:
        for k in ("olla", "guarded", "locally_deterministic", "globally_deterministic", "dolla", "uniquely_defined_all", "dolla_plus", "strictly_decreasing"):
            flags[k] = False
    flags["drx_constraints_legal"] = drx_ok
    deterministic = (flags["dolla"] or flags["dolla_plus"]) and drx_ok
    if deterministic and flags["strictly_decreasing"]:
        tier = "sd-fast"
    elif deterministic:
        tier = "deterministic-topdown"
    elif linear:
        tier = "memoized-topdown"
    else:
        tier = "fixpoint"
    return FragmentReport(flags, tier, diags, olla, glob, sd, dep)
