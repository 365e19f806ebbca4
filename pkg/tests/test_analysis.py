import itertools
import json
import random

import pytest
from conftest import load
from generators import random_olla_program
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import words

from fcdl import Equation, Pattern, Var, classify, parse_program
from fcdl.analysis import (
    END, START, TIERS, check_dolla_plus, check_drx_constraints, check_linear, check_strictly_decreasing,
    classify_olla, dependency_info, local_determinism_olla, profiles_and_global_determinism, rule_relation,
    semantic_determinism_oracle, top_bottom, uniquely_defined, values_conflict,
)
from fcdl.core import UNIV, Term, UsageError, intern_factors


def prog(text):
    return parse_program(text)


# ---------------------------------------------------------------- dependencies and linearity


def test_anbn_dependencies():
    dep = dependency_info(load("anbn.fcd"))
    assert dep.edges() == {("Ans", "E"), ("E", "E")}
    assert dep.mutual("E", "E")
    assert not dep.mutual("Ans", "E")


def test_even_length_answer_relation_is_self_recursive():
    dep = dependency_info(load("evenlen.fcd"))
    assert ("Ans", "Ans") in dep.edges() and ("Ans", "L") in dep.edges()
    assert dep.mutual("Ans", "Ans")
    assert dep.recursive_symbols() == {"Ans"}


def test_no_cycles_without_recursion():
    dep = dependency_info(prog("Ans() <- univ = ''."))
    assert dep.recursive_symbols() == set()


def test_mutual_recursion_between_two_symbols():
    dep = dependency_info(load("evena.fcd"))
    assert dep.mutual("E", "O") and dep.mutual("O", "E")
    assert dep.component("E") == {"E", "O"}


@pytest.mark.parametrize("name, linear", [("anbn.fcd", True), ("squares.fcd", True), ("evenlen.fcd", False)])
def test_linearity(name, linear):
    v = check_linear(load(name))
    assert v.flag is linear
    assert bool(v.diagnostics) is not linear


def test_smallest_program_is_linear():
    assert check_linear(prog("Ans() <- univ = ''.")).flag


def test_top_and_bottom_of_a_recursive_rule():
    p = prog("Ans() <- R(univ). R(x) <- x = y 'a', R(y).")
    tb = top_bottom(p.rules[1], dependency_info(p))
    assert tb.top == (Var("x"), UNIV) and tb.bottom == (Var("y"),)


def test_base_rule_has_empty_bottom():
    p = prog("Ans() <- R(univ). R(x) <- x = ''. R(x) <- x = 'a' y, R(y).")
    assert top_bottom(p.rules[1], dependency_info(p)).bottom == ()


def test_non_recursive_call_gives_empty_bottom():
    p = load("anbn.fcd")
    assert top_bottom(p.rules[0], dependency_info(p)).bottom == ()


def test_top_bottom_refuses_non_linear_rule():
    p = load("evenlen.fcd")
    with pytest.raises(UsageError):
        top_bottom(p.rules[0], dependency_info(p))


# ---------------------------------------------------------------- OLLA shapes and determinism


def test_square_equation_fits_no_lookahead_shape():
    report = classify_olla(load("squares.fcd"))
    assert not report.flag
    assert any("fits no" in d.msg for d in report.diagnostics)


@pytest.mark.parametrize("name", ["astar_dfa.fcd", "anbn_2head.fcd", "endsab_nfa.fcd", "udu_dolla.fcd"])
def test_compiled_automata_are_olla(name):
    assert classify_olla(load(name)).flag


def test_palindrome_is_not_olla_but_is_dolla_plus():
    p = load("palindrome.fcd")
    assert not classify_olla(p).flag
    assert check_dolla_plus(p).flag


def test_orientation_clash_is_rejected():
    report = classify_olla(prog("Ans() <- R(univ). R(x) <- x = 'a' y, R(y). R(x) <- x = y 'a', R(y)."))
    assert not report.flag
    assert any("left in one rule and the right" in d.msg for d in report.diagnostics)


def test_unguarded_alias_between_top_variables():
    p = prog("Ans() <- R(univ, univ). R(x, u) <- x = u, R(x, u). R(x, u) <- x = 'a' y, R(y, u).")
    report = classify_olla(p)
    assert not report.guarded


def test_consuming_one_letter_is_locally_deterministic():
    p = prog("Ans() <- R(univ). R(x) <- x = y 'a', R(y). R(x) <- x = ''.")
    assert local_determinism_olla(p).flag


def test_unconstrained_bottom_variable_breaks_local_determinism():
    v = local_determinism_olla(prog("Ans() <- R(univ). R(x) <- univ = x z, R(y)."))
    assert not v.flag
    assert "bottom variable y is unconstrained" in v.diagnostics[0].msg


def test_contradicting_rule_is_inert():
    p = prog("Ans() <- R(univ). R(x) <- x = 'a' y, x = '', R(y). R(x) <- x = 'a' y, R(y).")
    from fcdl.analysis import inert_rules

    assert inert_rules(p, classify_olla(p)) == {1}
    assert profiles_and_global_determinism(p).flag


def test_distinct_first_letters_conflict():
    p = prog("Ans() <- R(univ). R(x) <- x = 'a' y, R(y). R(x) <- x = 'b' y, R(y).")
    g = profiles_and_global_determinism(p)
    assert g.flag
    assert g.profiles[1].base == {0: "a"} and g.profiles[2].base == {0: "b"}


def test_empty_value_conflicts_with_both_letters():
    p = prog("Ans() <- R(univ). R(x) <- x = 'a' y, R(y). R(x) <- x = 'b' y, R(y). R(x) <- x = ''.")
    g = profiles_and_global_determinism(p)
    assert g.flag
    assert all(g.conflicts[(i, 3)] for i in (1, 2))


def test_same_letter_does_not_conflict():
    p = prog("Ans() <- R(univ). R(x) <- x = 'a' y, R(y). R(x) <- x = 'a' y, y = ''.")
    assert not profiles_and_global_determinism(p).flag


def test_lookahead_letters_separate_rules():
    p = prog("Ans() <- R(univ). R(x) <- univ = x 'a' z, x = y 'b', R(y). R(x) <- univ = x 'b' z, x = y 'b', R(y).")
    assert profiles_and_global_determinism(p).flag


@given(st.sampled_from(["a", "b", "", END, START, None]), st.sampled_from(["a", "b", "", END, START, None]))
def test_value_conflict_is_symmetric_and_irreflexive(a, b):
    assert values_conflict(a, b) == values_conflict(b, a)
    assert not values_conflict(a, a)
    if a is None or b is None:
        assert not values_conflict(a, b)


# ---------------------------------------------------------------- uniquely defined, DOLLA+, SD


def test_unique_definition_order_follows_single_unknowns():
    p = prog("Ans() <- R(univ, univ). R(x1, x2) <- x1 = x2 y1, y1 = y2 y2, R(y1, y2).")
    u = uniquely_defined(p.rules[1])
    assert u.flag and u.order == [Var("y1"), Var("y2")]


def test_palindrome_inner_variable_defined_in_one_round():
    u = uniquely_defined(load("palindrome.fcd").rules[2])
    assert u.flag and u.order == [Var("y")]


def test_two_fresh_unknowns_stay_undefined():
    u = uniquely_defined(prog("Ans() <- R(univ). R(x) <- x = y z, R(y).").rules[1])
    assert not u.flag and Var("y") not in u.defined


def _rule_with(eqs):
    from fcdl.core import Rule

    return Rule("R", (Var("x"),), tuple(eqs))


eq_strategy = st.builds(
    Equation,
    st.sampled_from([Var("x"), Var("y"), Var("z"), UNIV]),
    st.lists(st.sampled_from([Var("x"), Var("y"), Var("z"), Var("v"), Term("a")]), max_size=3).map(
        lambda items: Pattern(tuple(items))
    ),
)


@given(st.lists(eq_strategy, min_size=1, max_size=4), eq_strategy)
def test_adding_an_equation_never_shrinks_the_defined_set(eqs, extra):
    before = uniquely_defined(_rule_with(eqs))
    after = uniquely_defined(_rule_with(eqs + [extra]))
    assert before.defined <= after.defined
    assert before.rounds <= len(_rule_with(eqs).variables()) + 1


@pytest.mark.parametrize("name", ["squares.fcd", "palindrome.fcd", "anbn_dollaplus.fcd", "udu_dollaplus.fcd", "ex412.fcd"])
def test_dolla_plus_programs(name):
    assert check_dolla_plus(load(name)).flag


def test_palindrome_is_strictly_decreasing():
    sd = check_strictly_decreasing(load("palindrome.fcd"))
    assert sd.flag and sd.positions == {"R": 0}


def test_passing_the_value_unchanged_is_not_decreasing():
    p = prog("Ans() <- R(univ). R(x) <- x = y, R(y). R(x) <- x = ''.")
    assert not check_strictly_decreasing(p, require_fragment=False).flag


# ---------------------------------------------------------------- semantic oracle


def test_oracle_relation_for_one_letter_suffix():
    p = prog("Ans() <- R(univ). R(x) <- x = y 'a', R(y). R(x) <- x = ''.")
    r = semantic_determinism_oracle(p, "aa")
    assert r.relations[1] == {(("aa", "aa"), ("a",)), (("a", "aa"), ("",))}
    assert r.locally_deterministic


def test_oracle_detects_non_functional_rule():
    p = prog("Ans() <- R(univ). R(x) <- x = y z, R(y).")
    r = semantic_determinism_oracle(p, "ab")
    assert {b for t, b in r.relations[1] if t == ("ab", "ab")} == {("",), ("a",), ("ab",)}
    assert not r.partial[1]


def test_oracle_on_contradiction_is_vacuous():
    p = prog("Ans() <- R(univ). R(x) <- x = 'a' y, x = '', R(y).")
    r = semantic_determinism_oracle(p, "ab")
    assert r.relations[1] == set() and r.partial[1]


def test_oracle_refuses_long_words():
    with pytest.raises(UsageError):
        semantic_determinism_oracle(load("palindrome.fcd"), "a" * 9)


def _exhaustive_relation(rule, tb, w):
    """W for one rule by trying every value for every variable."""
    fs = sorted({w[i:j] for i in range(len(w) + 1) for j in range(i, len(w) + 1)})
    vs = [v for v in dict.fromkeys(list(tb.top) + list(tb.bottom) + rule.variables()) if v != UNIV]
    out = set()
    for values in itertools.product(fs, repeat=len(vs)):
        env = dict(zip(vs, values))
        env[UNIV] = w
        if all(env[e.lhs] == "".join(i.symbol if isinstance(i, Term) else env[i] for i in e.rhs.items) for e in rule.equations):
            out.add((tuple(env[v] for v in tb.top), tuple(env[v] for v in tb.bottom)))
    return out


@pytest.mark.parametrize("seed", range(30))
def test_oracle_relation_matches_exhaustive_enumeration(seed):
    p = random_olla_program(random.Random(seed), max_rules=4, max_arity=2)
    dep = dependency_info(p)
    for w in words("ab", 2):
        table = intern_factors(w)
        for r in p.rules:
            tb = top_bottom(r, dep)
            assert rule_relation(r, tb, w, table) == _exhaustive_relation(r, tb, w)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_syntactic_determinism_is_semantically_sound_on_short_words(seed):
    p = random_olla_program(random.Random(seed), max_rules=4, max_arity=2)
    olla = classify_olla(p)
    if not (olla.flag and olla.guarded and profiles_and_global_determinism(p, olla).flag):
        return
    for w in words("ab", 4):
        assert semantic_determinism_oracle(p, w).globally_deterministic


def test_generated_nondeterminism_is_visible_to_the_oracle():
    """The generator does produce programs the oracle flags, so the soundness
    check is not vacuous."""
    hits = 0
    for seed in range(60):
        p = random_olla_program(random.Random(seed))
        if profiles_and_global_determinism(p).flag:
            continue
        if any(not semantic_determinism_oracle(p, w).globally_deterministic for w in words("ab", 3)):
            hits += 1
    assert hits > 0


# ---------------------------------------------------------------- regex constraints and tiers


def test_single_constrained_rule_is_legal():
    assert check_drx_constraints(load("ex412.fcd")).flag


def test_second_rule_for_constrained_head_is_illegal():
    from fcdl import print_program

    p = prog(print_program(load("ex412.fcd")) + "R2(x) <- x = ''.")
    v = check_drx_constraints(p)
    assert not v.flag and "more than one rule" in v.diagnostics[0].msg


def test_nondeterministic_constraint_is_illegal():
    v = check_drx_constraints(prog("Ans() <- univ in /<x:(a|b)*> &x/."))
    assert not v.flag and "not deterministic" in v.diagnostics[0].msg


@pytest.mark.parametrize(
    "name, tier",
    [
        ("palindrome.fcd", "sd-fast"),
        ("squares.fcd", "sd-fast"),
        ("anbn_dollaplus.fcd", "sd-fast"),
        ("evena.fcd", "sd-fast"),
        ("ex412.fcd", "sd-fast"),
        ("udu_dolla.fcd", "sd-fast"),
        ("udu_dollaplus.fcd", "sd-fast"),
        ("astar_dfa.fcd", "deterministic-topdown"),
        ("anbn_2head.fcd", "deterministic-topdown"),
        ("anbn.fcd", "memoized-topdown"),
        ("contains_aa.fcd", "memoized-topdown"),
        ("endsab_nfa.fcd", "memoized-topdown"),
        ("evenlen.fcd", "fixpoint"),
    ],
)
def test_recommended_tier(name, tier):
    assert classify(load(name)).tier == tier


def test_report_implications_hold_on_corpus(programs):
    for p in programs.values():
        f = classify(p).flags
        if f["dolla"]:
            assert f["olla"] and f["locally_deterministic"] and f["globally_deterministic"]
        if f["dolla_plus"]:
            assert f["linear"] and f["uniquely_defined_all"]
        if f["strictly_decreasing"]:
            assert f["dolla"] or f["dolla_plus"]


def test_report_serializes_to_json():
    out = json.loads(json.dumps(classify(load("squares.fcd")).to_json()))
    assert out["tier"] in TIERS
    assert out["flags"]["olla"] is False
    assert all({"rule", "span", "msg", "flag"} <= d.keys() for d in out["diagnostics"])
