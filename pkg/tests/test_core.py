import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcdl import (
    Equation, FactorTable, InputError, Pattern, Program, RelAtom, Rule, Substitution, ValidationError, Var,
    apply_substitution, intern_factors, match_equation, parse_program, validate_program,
)
from fcdl.core import UNIV, IncompleteSubstitution, Term, match_all

x, y, z = Var("x"), Var("y"), Var("z")


@pytest.mark.parametrize(
    "word, expected",
    [
        ("ab", ["", "a", "b", "ab"]),
        ("aaa", ["", "a", "aa", "aaa"]),
        ("aba", ["", "a", "b", "ab", "ba", "aba"]),
        ("", [""]),
    ],
)
def test_intern_factors_lists_distinct_factors_shortest_first(word, expected):
    table = intern_factors(word)
    assert list(table.factors) == expected
    assert all(table.text(table.id(f)) == f for f in expected)


def test_intern_factors_rejects_foreign_letters():
    with pytest.raises(InputError):
        intern_factors("abc", "ab")


@given(st.text(alphabet="ab", max_size=10))
def test_factor_table_holds_exactly_the_substrings(w):
    table = intern_factors(w)
    brute = {w[i:j] for i in range(len(w) + 1) for j in range(i, len(w) + 1)}
    assert set(table.factors) == brute
    assert len(table) == len(brute)
    assert [len(f) for f in table.factors] == sorted(len(f) for f in table.factors)


def test_at_least_skips_short_factors():
    table = intern_factors("abab")
    assert all(len(f) >= 2 for f in table.at_least(2))
    assert set(table.at_least(2)) == {"ab", "ba", "aba", "bab", "abab"}
    assert table.at_least(9) == ()


@pytest.mark.parametrize(
    "pattern, theta, expected",
    [
        (Pattern.of(x, "a", x), {x: "ab"}, "abaab"),
        (Pattern.of("ab"), {}, "ab"),
        (Pattern.of(x), {x: ""}, ""),
    ],
)
def test_apply_substitution_concatenates(pattern, theta, expected):
    assert apply_substitution(pattern, theta) == expected


def test_apply_substitution_accepts_factor_ids():
    table = intern_factors("ab")
    theta = Substitution.from_text(table, {x: "ab"})
    assert apply_substitution(Pattern.of(x, "a", x), theta) == "abaab"


def test_apply_substitution_reports_unbound_variable():
    with pytest.raises(IncompleteSubstitution):
        apply_substitution(Pattern.of(x, y), {x: "a"})


def test_match_square_of_abab_binds_half():
    table = intern_factors("abab")
    theta = Substitution.from_text(table, {UNIV: "abab"})
    result = match_equation(Equation(UNIV, Pattern.of(y, y)), theta, table)
    assert [s.as_text()[y] for s in result] == ["ab"]


def test_match_square_of_odd_word_is_empty():
    table = intern_factors("aba")
    theta = Substitution.from_text(table, {UNIV: "aba"})
    assert match_equation(Equation(UNIV, Pattern.of(y, y)), theta, table) == set()


def test_match_empty_pattern_forces_empty_value():
    table = intern_factors("ab")
    result = match_equation(Equation(x, Pattern()), Substitution({}, table), table)
    assert [s.as_text()[x] for s in result] == [""]


def _brute_matches(eq: Equation, w: str) -> set[frozenset]:
    table = intern_factors(w)
    vs = [v for v in eq.variables() if v != UNIV]
    out = set()
    for values in itertools.product(table.factors, repeat=len(vs)):
        env = dict(zip(vs, values))
        env[UNIV] = w
        rhs = "".join(it.symbol if isinstance(it, Term) else env[it] for it in eq.rhs.items)
        if env[eq.lhs] == rhs:
            out.add(frozenset((v, env[v]) for v in vs))
    return out


items = st.lists(st.sampled_from([Term("a"), Term("b"), y, z]), max_size=4)


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="ab", max_size=5), st.sampled_from([UNIV, x]), items)
def test_match_equation_equals_exhaustive_search(w, lhs, rhs):
    eq = Equation(lhs, Pattern(tuple(rhs)))
    table = intern_factors(w)
    got = {
        frozenset((v, s) for v, s in sub.as_text().items() if v != UNIV)
        for sub in match_equation(eq, Substitution({}, table), table)
    }
    assert got == _brute_matches(eq, w)


def test_match_all_solves_a_conjunction():
    table = intern_factors("aab")
    eqs = [Equation(UNIV, Pattern.of(x, "b")), Equation(x, Pattern.of("a", y))]
    assert [(e[x], e[y]) for e in match_all(eqs, {}, table)] == [("aa", "a")]


def test_anbn_program_is_valid():
    prog = parse_program(
        "Ans() <- univ = y z, E(y, z). E(x, y) <- x = '', y = ''. E(x, y) <- x = 'a' u, y = 'b' v, E(u, v)."
    )
    assert validate_program(prog).ok
    assert dict(prog.relations) == {"Ans": 0, "E": 2}
    assert len(prog.rules) == 3


def test_head_variable_missing_from_body_is_invalid():
    with pytest.raises(ValidationError, match="head variable x not in body"):
        Program.of([Rule("Ans", (), (Equation(y, Pattern()),)), Rule("R", (x,), (Equation(y, Pattern()),))])


def test_self_referential_equation_is_rejected():
    with pytest.raises(ValidationError, match="not normalizable"):
        Program.of([Rule("Ans", (), (Equation(x, Pattern.of(x, "a")),))])


def test_program_without_answer_rule_is_rejected():
    with pytest.raises(ValidationError, match="no rule for Ans"):
        Program.of([Rule("R", (x,), (Equation(x, Pattern()),))])


def test_arity_mismatch_is_rejected():
    rules = [
        Rule("Ans", (), (RelAtom("R", (x,)), Equation(x, Pattern()))),
        Rule("R", (x, y), (Equation(x, Pattern()), Equation(y, Pattern()))),
    ]
    with pytest.raises(ValidationError, match="R"):
        Program.of(rules)


def test_declared_alphabet_rejects_foreign_terminals():
    with pytest.raises(ValidationError, match="outside the declared alphabet"):
        Program.of([Rule("Ans", (), (Equation(UNIV, Pattern.of("c")),))], alphabet="ab")


def test_alphabet_is_inferred_from_terminals():
    prog = Program.of([Rule("Ans", (), (Equation(UNIV, Pattern.of("b", x, "a")),))])
    assert list(prog.alphabet) == ["a", "b"]
    assert not prog.declared_alphabet


def test_substitution_is_hashable_and_compares_by_bindings():
    table = FactorTable("ab", ["", "a", "b", "ab"])
    s1 = Substitution({x: 1}, table)
    s2 = Substitution({}, table).bind(x, 1)
    assert s1 == s2 and hash(s1) == hash(s2)
    assert s1.text(x) == "a"
