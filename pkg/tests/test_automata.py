import random

import pytest
from conftest import CORPUS
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import ends_ab, first_equals_last, is_anbn, is_astar, words

from fcdl import UsageError, classify, compile_2dfa, compile_2nfa, eval_deterministic, model_check, parse_automaton
from fcdl.core import UNIV
from fcdl.syntax import LEFT_END, RIGHT_END
from fcdl.automata import simulate_automaton


def machine(name):
    return parse_automaton((CORPUS / name).read_text())


MACHINES = {
    "astar.json": is_astar,
    "anbn2.json": is_anbn,
    "endsab.json": ends_ab,
    "firstlast.json": first_equals_last,
}


@pytest.mark.parametrize("name", sorted(MACHINES))
def test_simulation_decides_the_intended_language(name):
    m = machine(name)
    for w in words("ab", 7):
        assert simulate_automaton(m, w) is MACHINES[name](w), w


@pytest.mark.parametrize("name", sorted(MACHINES))
def test_compiled_program_agrees_with_simulation(name):
    m = machine(name)
    p = compile_2nfa(m)
    for w in words("ab", 6):
        assert model_check(p, w) is simulate_automaton(m, w), w


@pytest.mark.parametrize("name", ["astar.json", "anbn2.json", "firstlast.json"])
def test_deterministic_compilation_is_dolla(name):
    p = compile_2dfa(machine(name))
    report = classify(p)
    assert report.flags["olla"] and report.flags["dolla"]
    for w in words("ab", 6):
        assert eval_deterministic(p, w).accepted is MACHINES[name](w), w


def test_compiled_programs_are_linear_olla():
    for name in MACHINES:
        f = classify(compile_2nfa(machine(name))).flags
        assert f["linear"] and f["olla"]


def test_nondeterministic_machine_is_refused_by_deterministic_compiler():
    with pytest.raises(UsageError, match="not deterministic"):
        compile_2dfa(machine("endsab.json"))


def _has_empty_word_rule(p):
    return any(r.head == "Ans" and [(e.lhs, e.rhs.items) for e in r.equations] == [(UNIV, ())] and not r.relation_atoms for r in p.rules)


def test_empty_word_rule_added_when_machine_accepts_empty():
    p = compile_2nfa(machine("astar.json"))
    assert _has_empty_word_rule(p)
    assert model_check(p, "")


def test_empty_word_rule_absent_otherwise():
    p = compile_2nfa(machine("endsab.json"))
    assert not _has_empty_word_rule(p)
    assert not model_check(p, "")


def test_deterministic_compiler_decides_empty_word_without_extra_rule():
    p = compile_2dfa(machine("astar.json"))
    assert not _has_empty_word_rule(p)
    assert eval_deterministic(p, "").accepted


def test_start_state_accepting_accepts_everything():
    d = machine("astar.json").to_json()
    d["accept"] = d["start"] = "q0"
    m = parse_automaton(d)
    p = compile_2dfa(m)
    assert all(model_check(p, w) for w in words("ab", 3))


def test_left_move_from_first_letter_reaches_the_endmarker():
    d = {
        "states": ["s", "t", "u", "acc"], "k": 1, "alphabet": ["a", "b"],
        "headSelector": {"s": 0, "t": 0, "u": 0, "acc": 0},
        "transitions": [
            {"from": "s", "symbol": "<", "to": "t", "move": 1},
            {"from": "t", "symbol": "b", "to": "u", "move": -1},
            {"from": "u", "symbol": "<", "to": "acc", "move": 0},
        ],
        "start": "s", "accept": "acc",
    }
    m = parse_automaton(d)
    p = compile_2dfa(m)
    for w in words("ab", 4):
        expected = w.startswith("b")
        assert simulate_automaton(m, w) is expected
        assert model_check(p, w) is expected


def random_automaton(rng: random.Random, k: int, n_states: int, density: float) -> dict:
    states = [f"s{i}" for i in range(n_states)] + ["acc"]
    trans = []
    for s in states[:-1]:
        for sym in ["a", "b", LEFT_END, RIGHT_END]:
            for t in states:
                for move in (-1, 0, 1):
                    if sym == LEFT_END and move < 0 or sym == RIGHT_END and move > 0:
                        continue
                    if rng.random() < density:
                        trans.append({"from": s, "symbol": sym, "to": t, "move": move})
    selector = {s: rng.randrange(k) for s in states}
    return {"states": states, "k": k, "alphabet": ["a", "b"], "headSelector": selector,
            "transitions": trans, "start": "s0", "accept": "acc"}


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 2), st.integers(1, 3))
def test_random_automata_compile_faithfully(seed, k, n_states):
    m = parse_automaton(random_automaton(random.Random(seed), k, n_states, 0.12))
    p = compile_2nfa(m)
    for w in words("ab", 3):
        assert model_check(p, w) is simulate_automaton(m, w), w
