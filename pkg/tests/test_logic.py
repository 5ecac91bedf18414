"""Formula layer: terms, evaluation, substitution, and the decision oracle.

The oracle's contract is one-sided soundness: Valid and Unsat answers must
be true over the integers, NotValid and Sat must come with a checked model.
The properties here compare against brute-force evaluation on bounded
domains, which is exact whenever the hypotheses confine every variable to
the tested box.
"""

import itertools

from hypothesis import given, settings
from hypothesis import strategies as st

from irterm.logic import (
    And,
    BinTerm,
    Cmp,
    Entailment,
    Instantiation,
    Not,
    Or,
    SatStatus,
    SymVar,
    conj,
    eq,
    eval_formula,
    eval_term,
    formula_to_smtlib,
    formula_vars,
    ge,
    gt,
    le,
    lt,
    ne,
    negate,
    nnf,
    satisfiable,
    subst_formula,
    term_to_smtlib,
    to_smtlib,
)
from irterm.logic import Oracle

V = [SymVar(i, f"x{i}") for i in range(1, 6)]
a, b, c, d, e = V


def test_term_evaluation():
    t = BinTerm("+", BinTerm("*", 3, a), -2)
    assert eval_term(t, {a: 4}) == 10
    assert eval_term(7, {}) == 7


def test_formula_evaluation_connectives():
    phi = Or((And((le(a, 3), ge(a, 1))), eq(a, 10)))
    assert eval_formula(phi, {a: 2})
    assert eval_formula(phi, {a: 10})
    assert not eval_formula(phi, {a: 5})


def test_substitution_replaces_in_nested_terms():
    phi = lt(BinTerm("+", a, b), 5)
    got = subst_formula(phi, {a: BinTerm("*", 2, c)})
    assert formula_vars(got) == frozenset({b, c})
    assert eval_formula(got, {b: 0, c: 2})
    assert not eval_formula(got, {b: 1, c: 2})


def test_negate_is_complement_pointwise():
    cases = [eq(a, 1), ne(a, 1), lt(a, b), le(a, b), gt(a, b), ge(a, b),
             And((lt(a, 2), gt(b, 0))), Or((eq(a, 0), eq(b, 0))), Not(eq(a, 3))]
    for phi in cases:
        neg = negate(phi)
        for va, vb in itertools.product(range(-3, 4), repeat=2):
            env = {a: va, b: vb}
            assert eval_formula(phi, env) != eval_formula(neg, env)


def test_nnf_preserves_meaning():
    phi = Not(And((lt(a, b), Or((eq(b, 2), Not(ge(a, 0)))))))
    flat = nnf(phi)
    for va, vb in itertools.product(range(-3, 4), repeat=2):
        env = {a: va, b: vb}
        assert eval_formula(phi, env) == eval_formula(flat, env)


def test_instantiation_application_and_domain():
    inst = Instantiation.of({a: b, c: 5})
    assert inst.get(a) == b
    assert inst.get(c) == 5
    assert inst.get(d) is None
    assert a in inst and d not in inst
    assert inst.apply(lt(a, c)) == lt(b, 5)


# -- oracle answers on small hand cases


def test_entails_basic_valid():
    o = Oracle()
    hyp = frozenset({ge(a, 0), eq(b, BinTerm("+", a, 1))})
    assert o.entails(hyp, ge(b, 1)) is Entailment.VALID
    assert o.entails(hyp, gt(b, a)) is Entailment.VALID


def test_entails_basic_not_valid_has_model():
    o = Oracle()
    hyp = frozenset({ge(a, 0)})
    assert o.entails(hyp, ge(a, 1)) is Entailment.NOT_VALID


def test_unsat_core_detected():
    o = Oracle()
    r = o.satisfiable([lt(a, b), lt(b, c), lt(c, a)])
    assert r.status is SatStatus.UNSAT


def test_sat_model_is_checked():
    o = Oracle()
    r = o.satisfiable([lt(a, b), eq(c, BinTerm("+", a, b))])
    assert r.status is SatStatus.SAT
    env = dict(r.model)
    assert env[a] < env[b] and env[c] == env[a] + env[b]


def test_inconsistent_hypothesis_is_valid():
    o = Oracle()
    hyp = frozenset({lt(a, 0), gt(a, 0)})
    assert o.entails(hyp, eq(b, 42)) is Entailment.VALID


# -- soundness properties against brute force

_atom_ops = ["=", "!=", "<", "<=", ">", ">="]


def _small_terms(vs):
    consts = st.integers(min_value=-4, max_value=4)
    base = st.sampled_from(vs) | consts
    return st.one_of(
        base,
        st.builds(lambda l, r: BinTerm("+", l, r), base, base),
        st.builds(lambda l, r: BinTerm("-", l, r), base, base),
        st.builds(lambda l, r: BinTerm("*", l, r), consts, base),
    )


def _atoms(vs):
    return st.builds(Cmp, st.sampled_from(_atom_ops), _small_terms(vs), _small_terms(vs))


@st.composite
def _bounded_case(draw):
    k = draw(st.integers(min_value=1, max_value=3))
    vs = V[:k]
    bounds = [le(-4, v) for v in vs] + [le(v, 4) for v in vs]
    hyp = draw(st.lists(_atoms(vs), min_size=0, max_size=3))
    goal = draw(_atoms(vs))
    return vs, frozenset(bounds + hyp), goal


def _brute_valid(vs, hyp, goal, lo=-4, hi=4):
    for vals in itertools.product(range(lo, hi + 1), repeat=len(vs)):
        env = dict(zip(vs, vals))
        if all(eval_formula(p, env) for p in hyp) and not eval_formula(goal, env):
            return False
    return True


@given(_bounded_case())
@settings(max_examples=120, deadline=None)
def test_entailment_never_unsound(case):
    vs, hyp, goal = case
    o = Oracle()
    ans = o.entails(hyp, goal)
    truth = _brute_valid(vs, hyp, goal)
    if ans is Entailment.VALID:
        assert truth
    elif ans is Entailment.NOT_VALID:
        assert not truth


@given(_bounded_case())
@settings(max_examples=120, deadline=None)
def test_satisfiability_never_unsound(case):
    vs, hyp, _ = case
    o = Oracle()
    r = o.satisfiable(list(hyp))
    has_model = any(
        all(eval_formula(p, dict(zip(vs, vals))) for p in hyp)
        for vals in itertools.product(range(-4, 5), repeat=len(vs))
    )
    if r.status is SatStatus.UNSAT:
        assert not has_model
    elif r.status is SatStatus.SAT:
        env = dict(r.model)
        assert all(eval_formula(p, env) for p in hyp)


# -- SMT-LIB emission is well formed and references declared symbols


def test_smtlib_rendering():
    assert term_to_smtlib(BinTerm("+", a, 3)) == "(+ v1 3)"
    assert term_to_smtlib(BinTerm("-", a, b)) == "(- v1 v2)"
    assert formula_to_smtlib(ne(a, 0)) == "(not (= v1 0))"
    assert formula_to_smtlib(conj(le(a, b), eq(b, 2))) == "(and (<= v1 v2) (= v2 2))"


def test_smtlib_script_declares_all_variables():
    script = to_smtlib([lt(a, b), eq(c, BinTerm("*", 2, a))])
    for v in (a, b, c):
        assert f"(declare-const v{v.id} Int)" in script
    assert script.count("(assert") == 2
    assert "(check-sat)" in script


def test_entails_module_helper_uses_default_oracle():
    from irterm.logic import entails

    assert entails([ge(a, 3)], gt(a, 2)) is Entailment.VALID
