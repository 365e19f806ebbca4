"""FC-Datalog: Datalog over the factors of a word."""
from .core import (
    Alphabet, BudgetError, DrxAtom, Equation, FactorTable, FcdlError, InputError, Pattern,
    Program, RelAtom, Rule, Substitution, Term, UsageError, ValidationError, Var,
    apply_substitution, intern_factors, match_equation, validate_program,
)
from .syntax import ParseError, parse_automaton, parse_drx, parse_program, parse_turing, print_drx, print_program
from .analysis import FragmentReport, classify
from .fixpoint import Budget, evaluate, evaluate_semi_naive, model_check
from .topdown import (
    EvalResult, EvalTrace, InconsistencyError, InsufficientInstantiation, build_rule_lookup,
    eval_deterministic, eval_drx_constraint, eval_memoized, eval_sd, solve_unique_equation,
)
from .drx import (
    CompileStats, compile_drx_dolla, compile_drx_dollaplus, drx_check_deterministic, drx_match,
    drx_match_bruteforce, drx_position_automaton,
)
from .automata import compile_2dfa, compile_2nfa, simulate_automaton
from .pspace import generate_pspace_instance, simulate_turing

__version__ = "0.1.0"
