"""Space-bounded Turing machine acceptance as a linear program.

The word is a^n with n = max(k, |tape alphabet|). Head positions and tape
symbols are both encoded in unary as prefixes a^i of the word. Relation
C<q>(head, cell1..cellk) holds for every configuration from which the
machine reaches acceptance: state omega, head on cell 0, blank tape."""
from __future__ import annotations

from .core import ANSWER, Equation, Pattern, Program, RelAtom, Rule, Term, UsageError, Var
from .syntax import TuringSpec


def _unary(i: int) -> Pattern:
    return Pattern(tuple(Term("a") for _ in range(i)))


def generate_pspace_instance(t: TuringSpec, k: int) -> tuple[Program, str]:
    if k < 1:
        raise UsageError("space bound k must be at least 1")
    code = {s: i for i, s in enumerate(t.tape)}
    index = {s: i for i, s in enumerate(t.states)}
    n = max(k, len(t.tape))
    word = "a" * n
    h, h2 = Var("h"), Var("h2")
    cs = tuple(Var(f"c{j + 1}") for j in range(k))
    ds = tuple(Var(f"d{j + 1}") for j in range(k))
    blank = _unary(code[t.blank])

    def rel(q: str) -> str:
        return f"C{index[q]}"

    rules = [
        Rule(
            ANSWER,
            (),
            (RelAtom(rel(t.start), (h, *cs)), Equation(h, _unary(0)), *(Equation(c, blank) for c in cs)),
        )
    ]
    for (q, read), (q2, write, move) in sorted(t.delta.items()):
        if q == t.omega:
            continue  # the machine halts in omega
        step = 1 if move == "R" else -1
        for i in range(k):
            if not 0 <= i + step < k:
                continue
            body: list = [
                RelAtom(rel(q2), (h2, *ds)),
                Equation(h, _unary(i)),
                Equation(h2, _unary(i + step)),
                Equation(cs[i], _unary(code[read])),
                Equation(ds[i], _unary(code[write])),
            ]
            body += [Equation(cs[j], Pattern((ds[j],))) for j in range(k) if j != i]
            rules.append(Rule(rel(q), (h, *cs), tuple(body)))
    rules.append(Rule(rel(t.omega), (h, *cs), (Equation(h, _unary(0)), *(Equation(c, blank) for c in cs))))
    return Program.of(rules, alphabet="a"), word


def simulate_turing(t: TuringSpec, k: int) -> bool:
    """Run from the blank tape within cells 0..k-1. Rejects on leaving the
    space, on a missing transition, on halting in omega with a non-blank
    tape or displaced head, and on a repeated configuration."""
    state, head, tape = t.start, 0, (t.blank,) * k
    seen = set()
    while True:
        if state == t.omega:
            return head == 0 and all(c == t.blank for c in tape)
        conf = (state, head, tape)
        if conf in seen:
            return False
        seen.add(conf)
        move = t.delta.get((state, tape[head]))
        if move is None:
            return False
        state, write, d = move
        tape = tape[:head] + (write,) + tape[head + 1:]
        head += 1 if d == "R" else -1
        if not 0 <= head < k:
            return False
