"""Two-way multi-head automata: direct simulation and translation into
linear programs.

Head h sits at tape position p on the tape `<` w `>` (0 = left endmarker,
len(w)+1 = right endmarker). A head at p >= 1 is represented by the prefix
of w of length p - 1, so the letter it scans is the one just after its
prefix (or the right endmarker once the prefix is all of w). A head on the
left endmarker has no prefix of its own: it is carried as the empty prefix
with a bit set in the relation name, `Q<state>_<mask>`."""
from __future__ import annotations

from collections import deque
from typing import Iterator

from .core import ANSWER, UNIV, Equation, Pattern, Program, RelAtom, Rule, Term, UsageError, Var
from .syntax import LEFT_END, RIGHT_END, MultiHeadAutomaton


def _tape_symbol(w: str, p: int) -> str:
    if p == 0:
        return LEFT_END
    if p == len(w) + 1:
        return RIGHT_END
    return w[p - 1]


def simulate_automaton(m: MultiHeadAutomaton, w: str) -> bool:
    """Breadth-first search over configurations (state, head positions)."""
    start = (m.start, (0,) * m.k)
    if m.start == m.accept:
        return True
    seen = {start}
    queue = deque([start])
    while queue:
        state, heads = queue.popleft()
        h = m.head_selector[state]
        for nxt, move in m.moves(state, _tape_symbol(w, heads[h])):
            if nxt == m.accept:
                return True
            moved = heads[:h] + (heads[h] + move,) + heads[h + 1:]
            conf = (nxt, moved)
            if conf not in seen:
                seen.add(conf)
                queue.append(conf)
    return False


def accepts_empty(m: MultiHeadAutomaton) -> bool:
    return simulate_automaton(m, "")


def _reachable(m: MultiHeadAutomaton) -> Iterator[tuple[str, int]]:
    """(state, endmarker mask) pairs that can occur, from the start."""
    full = (1 << m.k) - 1
    seen = {(m.start, full)}
    queue = deque(seen)
    while queue:
        state, mask = queue.popleft()
        yield state, mask
        h = m.head_selector[state]
        on_left = mask >> h & 1
        syms = [LEFT_END] if on_left else [*m.alphabet, RIGHT_END]
        for sym in syms:
            for nxt, move in m.moves(state, sym):
                if nxt == m.accept:
                    continue
                if on_left:
                    new = mask & ~(1 << h) if move == 1 else mask
                    targets = [new]
                elif move == -1:
                    # stepping back from the first letter lands on the endmarker
                    targets = [mask, mask | 1 << h]
                else:
                    targets = [mask]
                for t in targets:
                    if (nxt, t) not in seen:
                        seen.add((nxt, t))
                        queue.append((nxt, t))


def _compile(m: MultiHeadAutomaton, *, empty_rule: bool) -> Program:
    index = {s: i for i, s in enumerate(m.states)}

    def rel(state: str, mask: int) -> str:
        return f"Q{index[state]}_{mask:0{m.k}b}"

    xs = tuple(Var(f"x{i + 1}") for i in range(m.k))
    full = (1 << m.k) - 1
    rules: list[Rule] = []
    if m.start == m.accept:
        rules.append(Rule(ANSWER, (), (Equation(UNIV, Pattern((Var("z"),))),)))
        return Program.of(rules, alphabet=m.alphabet)
    starts = tuple(Var(f"p{i + 1}") for i in range(m.k))
    rules.append(Rule(ANSWER, (), (RelAtom(rel(m.start, full), starts),) + tuple(Equation(p, Pattern(())) for p in starts)))
    if empty_rule and accepts_empty(m):
        rules.append(Rule(ANSWER, (), (Equation(UNIV, Pattern(())),)))

    for state, mask in _reachable(m):
        h = m.head_selector[state]
        x = xs[h]
        y = Var(f"y{h + 1}")
        on_left = mask >> h & 1
        syms = [LEFT_END] if on_left else [*m.alphabet, RIGHT_END]
        for sym in syms:
            if sym == LEFT_END:
                read: list[Equation] = []
            elif sym == RIGHT_END:
                read = [Equation(x, Pattern((UNIV,)))]
            else:
                read = [Equation(UNIV, Pattern((x, Term(sym), Var("z"))))]
            for nxt, move in sorted(m.moves(state, sym)):
                # each alternative: (extra equations, new value of head h, new mask)
                alts: list[tuple[list[Equation], Var, int]] = []
                if on_left:
                    alts.append(([], x, mask & ~(1 << h) if move == 1 else mask))
                elif move == 1:
                    alts.append(([Equation(y, Pattern((x, Term(sym))))], y, mask))
                elif move == 0:
                    alts.append(([], x, mask))
                else:
                    alts.append(([Equation(x, Pattern(()))], x, mask | 1 << h))
                    for b in m.alphabet:
                        alts.append(([Equation(x, Pattern((y, Term(b))))], y, mask))
                for eqs, new_x, new_mask in alts:
                    body: list = read + eqs
                    if nxt == m.accept:
                        # no successor atom: every other head still needs a binding
                        mentioned = {v for e in body for v in e.variables()}
                        for j, xj in enumerate(xs):
                            if xj not in mentioned:
                                body.append(Equation(UNIV, Pattern((xj, Var(f"z{j + 1}")))))
                        body = [e for e in body if not (e.lhs == y and y not in {v for o in body if o is not e for v in o.variables()})]
                    else:
                        args = xs[:h] + (new_x,) + xs[h + 1:]
                        body.insert(0, RelAtom(rel(nxt, new_mask), args))
                    rules.append(Rule(rel(state, mask), xs, tuple(body)))
    return Program.of(rules, alphabet=m.alphabet)


def compile_2nfa(m: MultiHeadAutomaton) -> Program:
    """Linear program accepting exactly the words the automaton accepts."""
    return _compile(m, empty_rule=True)


def compile_2dfa(m: MultiHeadAutomaton) -> Program:
    """The same translation for a deterministic automaton. The extra rule for
    the empty word is left out: the endmarker encoding already decides it,
    and a second unconditional Ans rule would break rule determinism."""
    if not m.deterministic:
        bad = next(key for key, v in m.transitions.items() if len(v) > 1)
        raise UsageError(f"automaton is not deterministic: state {bad[0]!r} on {bad[1]!r} has {len(m.transitions[bad])} moves")
    return _compile(m, empty_rule=False)
