"""Quantifier-free integer arithmetic: terms, formulas, and a three-valued oracle.

Terms are built from integer literals, symbolic variables and +, -, *.
Formulas are comparisons combined with not/and/or/implies.  Sets of
formulas (plain frozensets) denote conjunction throughout the package.

The oracle answers entailment and satisfiability questions with
Valid/NotValid/Unknown resp. Sat/Unsat/Unknown.  Its internal procedure
normalizes to NNF, case-splits disjunctions under a budget, and decides
conjunctions of linear atoms by integer Fourier-Motzkin elimination with
unit-coefficient equality pre-substitution.  Every Sat answer carries a
model that has been re-checked by evaluation; Unsat answers are sound
because the rational relaxation is.  Atoms that multiply two non-constant
terms are nonlinear: they never contribute to Unsat reasoning and force
Unknown unless a found model happens to satisfy them.

An external SMT-LIB solver process can be plugged in (see smtlib.py); it
is consulted only when the internal procedure answers Unknown.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Union


# ---------------------------------------------------------------------------
# terms


@dataclass(frozen=True)
class SymVar:
    """A symbolic variable, identified by its numeric id.

    The hint is display-only and excluded from equality so that renamed
    copies of a state compare by identity structure, not by label.
    """

    id: int
    hint: Optional[str] = field(default=None, compare=False)

    def __repr__(self) -> str:
        return self.hint if self.hint else f"v{self.id}"

    def __lt__(self, other: "SymVar") -> bool:
        return self.id < other.id

    # convenience constructors for terms and atoms
    def __add__(self, other):
        return BinTerm("+", self, _as_term(other))

    def __radd__(self, other):
        return BinTerm("+", _as_term(other), self)

    def __sub__(self, other):
        return BinTerm("-", self, _as_term(other))

    def __rsub__(self, other):
        return BinTerm("-", _as_term(other), self)

    def __mul__(self, other):
        return BinTerm("*", self, _as_term(other))

    def __rmul__(self, other):
        return BinTerm("*", _as_term(other), self)


@dataclass(frozen=True)
class BinTerm:
    op: str  # '+', '-' or '*'
    lhs: "Term"
    rhs: "Term"

    def __repr__(self) -> str:
        return render_term(self)

    def __add__(self, other):
        return BinTerm("+", self, _as_term(other))

    def __sub__(self, other):
        return BinTerm("-", self, _as_term(other))

    def __mul__(self, other):
        return BinTerm("*", self, _as_term(other))


Term = Union[int, SymVar, BinTerm]


def _as_term(x) -> Term:
    if isinstance(x, (int, SymVar, BinTerm)) and not isinstance(x, bool):
        return x
    raise TypeError(f"not a term: {x!r}")


def term_vars(t: Term) -> frozenset[SymVar]:
    if isinstance(t, int):
        return frozenset()
    if isinstance(t, SymVar):
        return frozenset((t,))
    return term_vars(t.lhs) | term_vars(t.rhs)


def eval_term(t: Term, env: Mapping[SymVar, int]) -> int:
    if isinstance(t, int):
        return t
    if isinstance(t, SymVar):
        return env[t]
    a, b = eval_term(t.lhs, env), eval_term(t.rhs, env)
    if t.op == "+":
        return a + b
    if t.op == "-":
        return a - b
    if t.op == "*":
        return a * b
    raise ValueError(f"bad term op {t.op}")


def subst_term(t: Term, mapping: Mapping[SymVar, Term]) -> Term:
    if isinstance(t, int):
        return t
    if isinstance(t, SymVar):
        return mapping.get(t, t)
    return BinTerm(t.op, subst_term(t.lhs, mapping), subst_term(t.rhs, mapping))


def render_term(t: Term) -> str:
    if isinstance(t, int):
        return str(t)
    if isinstance(t, SymVar):
        return repr(t)
    return f"({render_term(t.lhs)} {t.op} {render_term(t.rhs)})"


def canon_term(t: Term) -> str:
    """Canonical rendering (ids only, no hints); used for sorting and JSON."""
    if isinstance(t, int):
        return str(t)
    if isinstance(t, SymVar):
        return f"v{t.id}"
    return f"({canon_term(t.lhs)} {t.op} {canon_term(t.rhs)})"


# ---------------------------------------------------------------------------
# formulas

_CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
_NEG = {"=": "!=", "!=": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
_SWAP = {"=": "=", "!=": "!=", "<": ">", "<=": ">=", ">": "<", ">=": "<="}


@dataclass(frozen=True)
class Cmp:
    op: str
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if self.op not in _CMP_OPS:
            raise ValueError(f"bad comparison op {self.op}")

    def __repr__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def __repr__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class And:
    args: tuple

    def __repr__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __repr__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"

    def __repr__(self) -> str:
        return render_formula(self)


Formula = Union[Cmp, Not, And, Or, Implies]
FormulaSet = frozenset  # frozenset[Formula], read as conjunction

TRUE = And(())
FALSE = Or(())


def eq(a, b) -> Cmp:
    return Cmp("=", _as_term(a), _as_term(b))


def ne(a, b) -> Cmp:
    return Cmp("!=", _as_term(a), _as_term(b))


def lt(a, b) -> Cmp:
    return Cmp("<", _as_term(a), _as_term(b))


def le(a, b) -> Cmp:
    return Cmp("<=", _as_term(a), _as_term(b))


def gt(a, b) -> Cmp:
    return Cmp(">", _as_term(a), _as_term(b))


def ge(a, b) -> Cmp:
    return Cmp(">=", _as_term(a), _as_term(b))


def conj(*phis: Formula) -> Formula:
    return And(tuple(phis))


def disj(*phis: Formula) -> Formula:
    return Or(tuple(phis))


def fset(*phis: Formula) -> FormulaSet:
    return frozenset(phis)


def formula_vars(phi: Formula) -> frozenset[SymVar]:
    if isinstance(phi, Cmp):
        return term_vars(phi.lhs) | term_vars(phi.rhs)
    if isinstance(phi, Not):
        return formula_vars(phi.arg)
    if isinstance(phi, (And, Or)):
        out: frozenset[SymVar] = frozenset()
        for a in phi.args:
            out |= formula_vars(a)
        return out
    if isinstance(phi, Implies):
        return formula_vars(phi.lhs) | formula_vars(phi.rhs)
    raise TypeError(f"not a formula: {phi!r}")


def fset_vars(phis: Iterable[Formula]) -> frozenset[SymVar]:
    out: frozenset[SymVar] = frozenset()
    for p in phis:
        out |= formula_vars(p)
    return out


def subst_formula(phi: Formula, mapping: Mapping[SymVar, Term]) -> Formula:
    if isinstance(phi, Cmp):
        return Cmp(phi.op, subst_term(phi.lhs, mapping), subst_term(phi.rhs, mapping))
    if isinstance(phi, Not):
        return Not(subst_formula(phi.arg, mapping))
    if isinstance(phi, And):
        return And(tuple(subst_formula(a, mapping) for a in phi.args))
    if isinstance(phi, Or):
        return Or(tuple(subst_formula(a, mapping) for a in phi.args))
    if isinstance(phi, Implies):
        return Implies(subst_formula(phi.lhs, mapping), subst_formula(phi.rhs, mapping))
    raise TypeError(f"not a formula: {phi!r}")


def eval_formula(phi: Formula, env: Mapping[SymVar, int]) -> bool:
    if isinstance(phi, Cmp):
        a, b = eval_term(phi.lhs, env), eval_term(phi.rhs, env)
        return {
            "=": a == b,
            "!=": a != b,
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
        }[phi.op]
    if isinstance(phi, Not):
        return not eval_formula(phi.arg, env)
    if isinstance(phi, And):
        return all(eval_formula(a, env) for a in phi.args)
    if isinstance(phi, Or):
        return any(eval_formula(a, env) for a in phi.args)
    if isinstance(phi, Implies):
        return (not eval_formula(phi.lhs, env)) or eval_formula(phi.rhs, env)
    raise TypeError(f"not a formula: {phi!r}")


def render_formula(phi: Formula) -> str:
    if isinstance(phi, Cmp):
        return f"{render_term(phi.lhs)} {phi.op} {render_term(phi.rhs)}"
    if isinstance(phi, Not):
        return f"not({render_formula(phi.arg)})"
    if isinstance(phi, And):
        return "true" if not phi.args else "and(" + ", ".join(render_formula(a) for a in phi.args) + ")"
    if isinstance(phi, Or):
        return "false" if not phi.args else "or(" + ", ".join(render_formula(a) for a in phi.args) + ")"
    if isinstance(phi, Implies):
        return f"({render_formula(phi.lhs)} -> {render_formula(phi.rhs)})"
    raise TypeError(f"not a formula: {phi!r}")


def canon_formula(phi: Formula) -> str:
    if isinstance(phi, Cmp):
        return f"{canon_term(phi.lhs)} {phi.op} {canon_term(phi.rhs)}"
    if isinstance(phi, Not):
        return f"not({canon_formula(phi.arg)})"
    if isinstance(phi, And):
        return "true" if not phi.args else "and(" + ", ".join(canon_formula(a) for a in phi.args) + ")"
    if isinstance(phi, Or):
        return "false" if not phi.args else "or(" + ", ".join(canon_formula(a) for a in phi.args) + ")"
    if isinstance(phi, Implies):
        return f"({canon_formula(phi.lhs)} -> {canon_formula(phi.rhs)})"
    raise TypeError(f"not a formula: {phi!r}")


def sorted_formulas(phis: Iterable[Formula]) -> list:
    return sorted(phis, key=canon_formula)


def negate(phi: Formula) -> Formula:
    if isinstance(phi, Cmp):
        return Cmp(_NEG[phi.op], phi.lhs, phi.rhs)
    return Not(phi)


# ---------------------------------------------------------------------------
# instantiations


@dataclass(frozen=True)
class Instantiation:
    """A finite map from symbolic variables to terms, applied capture-free."""

    pairs: tuple  # tuple[tuple[SymVar, Term], ...] sorted by var id

    @staticmethod
    def of(mapping: Mapping[SymVar, Term]) -> "Instantiation":
        return Instantiation(tuple(sorted(mapping.items(), key=lambda kv: kv[0].id)))

    @staticmethod
    def identity() -> "Instantiation":
        return Instantiation(())

    @cached_property
    def _map(self) -> dict:
        return dict(self.pairs)

    def as_dict(self) -> dict:
        return dict(self._map)

    def get(self, v: SymVar, default=None):
        return self._map.get(v, default)

    def __contains__(self, v: SymVar) -> bool:
        return v in self._map

    def domain(self) -> frozenset[SymVar]:
        return frozenset(self._map)

    def is_var_map(self) -> bool:
        return all(isinstance(t, SymVar) for _, t in self.pairs)

    def is_injective(self) -> bool:
        rng = [canon_term(t) for _, t in self.pairs]
        return len(rng) == len(set(rng))

    def apply(self, x):
        """Apply to a Term, Formula, FormulaSet, or Instantiation-compatible tuple."""
        m = self.as_dict()
        if isinstance(x, frozenset):
            return frozenset(subst_formula(p, m) for p in x)
        if isinstance(x, (Cmp, Not, And, Or, Implies)):
            return subst_formula(x, m)
        if isinstance(x, (int, SymVar, BinTerm)):
            return subst_term(x, m)
        raise TypeError(f"cannot apply instantiation to {x!r}")

    def compose(self, inner: "Instantiation") -> "Instantiation":
        """self after inner: (self.compose(inner)).apply(x) == self.apply(inner.apply(x)).

        Defined on the union of both domains.
        """
        m = self.as_dict()
        out: dict = {}
        for v, t in inner.pairs:
            out[v] = subst_term(t, m)
        for v, t in m.items():
            out.setdefault(v, t)
        return Instantiation.of(out)

    def inverse(self) -> "Instantiation":
        if not self.is_var_map() or not self.is_injective():
            raise ValueError("inverse requires an injective variable-to-variable map")
        return Instantiation.of({t: v for v, t in self.pairs})

    def __repr__(self) -> str:
        return "{" + ", ".join(f"{v!r} -> {render_term(t)}" for v, t in self.pairs) + "}"


def apply(inst: Instantiation, phi):
    """Functional form of Instantiation.apply."""
    return inst.apply(phi)


# ---------------------------------------------------------------------------
# linear normal form

# A linear atom is coeffs . vars + const <= 0 (ints); equalities kept separate.


def linearize(t: Term) -> Optional[tuple[dict, int]]:
    """Term -> (coeffs, const), or None if a product of two non-constants occurs."""
    if isinstance(t, int):
        return {}, t
    if isinstance(t, SymVar):
        return {t: 1}, 0
    a = linearize(t.lhs)
    b = linearize(t.rhs)
    if a is None or b is None:
        return None
    (ca, ka), (cb, kb) = a, b
    if t.op == "+":
        out = dict(ca)
        for v, c in cb.items():
            out[v] = out.get(v, 0) + c
        return {v: c for v, c in out.items() if c}, ka + kb
    if t.op == "-":
        out = dict(ca)
        for v, c in cb.items():
            out[v] = out.get(v, 0) - c
        return {v: c for v, c in out.items() if c}, ka - kb
    if t.op == "*":
        if not ca:  # constant * linear
            return {v: ka * c for v, c in cb.items() if ka * c}, ka * kb
        if not cb:
            return {v: kb * c for v, c in ca.items() if kb * c}, ka * kb
        return None
    raise ValueError(f"bad term op {t.op}")


def is_nonlinear_atom(phi: Cmp) -> bool:
    return linearize(BinTerm("-", phi.lhs, phi.rhs)) is None


@dataclass(frozen=True)
class _Lin:
    """coeffs . vars + const (op) 0, with op in {'<=', '='}."""

    coeffs: tuple  # tuple[(SymVar, int)] sorted by id
    const: int
    op: str

    def vars(self) -> frozenset[SymVar]:
        return frozenset(v for v, _ in self.coeffs)


def _mk_lin(coeffs: dict, const: int, op: str) -> _Lin:
    return _Lin(tuple(sorted(((v, c) for v, c in coeffs.items() if c), key=lambda vc: vc[0].id)), const, op)


def _atom_to_lins(phi: Cmp) -> Optional[list]:
    """Comparison -> list of _Lin (conjunction). '!=' is handled by the case split."""
    lin = linearize(BinTerm("-", phi.lhs, phi.rhs))
    if lin is None:
        return None
    coeffs, const = lin
    if phi.op == "=":
        return [_mk_lin(coeffs, const, "=")]
    if phi.op == "<=":
        return [_mk_lin(coeffs, const, "<=")]
    if phi.op == "<":
        return [_mk_lin(coeffs, const + 1, "<=")]
    if phi.op == ">=":
        return [_mk_lin({v: -c for v, c in coeffs.items()}, -const, "<=")]
    if phi.op == ">":
        return [_mk_lin({v: -c for v, c in coeffs.items()}, -const + 1, "<=")]
    raise ValueError(phi.op)


# ---------------------------------------------------------------------------
# NNF and case splitting


def _nnf(phi: Formula, neg: bool) -> Formula:
    if isinstance(phi, Cmp):
        return Cmp(_NEG[phi.op], phi.lhs, phi.rhs) if neg else phi
    if isinstance(phi, Not):
        return _nnf(phi.arg, not neg)
    if isinstance(phi, And):
        args = tuple(_nnf(a, neg) for a in phi.args)
        return Or(args) if neg else And(args)
    if isinstance(phi, Or):
        args = tuple(_nnf(a, neg) for a in phi.args)
        return And(args) if neg else Or(args)
    if isinstance(phi, Implies):
        if neg:
            return And((_nnf(phi.lhs, False), _nnf(phi.rhs, True)))
        return Or((_nnf(phi.lhs, True), _nnf(phi.rhs, False)))
    raise TypeError(f"not a formula: {phi!r}")


def nnf(phi: Formula) -> Formula:
    return _nnf(phi, False)


def _split_branches(phis: list, budget: int) -> Optional[list]:
    """NNF conjunction -> list of atom-conjunction branches (DNF), or None if over budget.

    '!=' atoms split into < and >.
    """
    branches: list[list[Cmp]] = [[]]

    def expand(phi: Formula, acc: list) -> Optional[list]:
        # returns list of extensions (each a list of atoms) for one branch prefix
        if isinstance(phi, Cmp):
            if phi.op == "!=":
                return [acc + [Cmp("<", phi.lhs, phi.rhs)], acc + [Cmp(">", phi.lhs, phi.rhs)]]
            return [acc + [phi]]
        if isinstance(phi, And):
            outs = [acc]
            for a in phi.args:
                nxt = []
                for o in outs:
                    e = expand(a, o)
                    if e is None:
                        return None
                    nxt.extend(e)
                    if len(nxt) > budget:
                        return None
                outs = nxt
            return outs
        if isinstance(phi, Or):
            if not phi.args:
                return []
            outs = []
            for a in phi.args:
                e = expand(a, acc)
                if e is None:
                    return None
                outs.extend(e)
                if len(outs) > budget:
                    return None
            return outs
        raise TypeError(f"unexpected formula in NNF: {phi!r}")

    for phi in phis:
        nxt = []
        for br in branches:
            e = expand(phi, br)
            if e is None:
                return None
            nxt.extend(e)
            if len(nxt) > budget:
                return None
        branches = nxt
    return branches


# ---------------------------------------------------------------------------
# Fourier-Motzkin core


class _Budget(Exception):
    pass


def _substitute_lin(lin: _Lin, var: SymVar, coeffs: dict, const: int) -> _Lin:
    """Replace var by (coeffs . vars + const) in lin; var's own coefficient folds in."""
    d = dict(lin.coeffs)
    c = d.pop(var, 0)
    if c:
        for v, k in coeffs.items():
            d[v] = d.get(v, 0) + c * k
    return _mk_lin(d, lin.const + c * const, lin.op)


def _solve_linear(lins: list, cap: int = 3000) -> tuple[str, Optional[dict]]:
    """Decide a conjunction of _Lin constraints over the integers.

    Returns ('unsat', None) | ('sat', model) | ('unknown', None).  The model
    covers every variable of the system and is exact for its constraints;
    callers re-verify against original formulas anyway.
    """
    subs: list[tuple[SymVar, dict, int]] = []  # var = coeffs . vars + const
    work = list(lins)

    # unit-coefficient equality substitution
    changed = True
    while changed:
        changed = False
        for i, ln in enumerate(work):
            if ln.op != "=":
                continue
            unit = next((v for v, c in ln.coeffs if c in (1, -1)), None)
            if unit is None:
                continue
            d = dict(ln.coeffs)
            cu = d.pop(unit)
            # unit*cu + rest + const = 0  ->  unit = -(rest + const)/cu
            rep = {v: -c * cu for v, c in d.items()}  # cu in {1,-1} so /cu == *cu
            repc = -ln.const * cu
            subs.append((unit, rep, repc))
            work = [_substitute_lin(w, unit, rep, repc) for w in work[:i] + work[i + 1 :]]
            changed = True
            break

    # residual equalities become two inequalities
    ineqs: list[_Lin] = []
    for ln in work:
        if not ln.coeffs:
            if (ln.op == "=" and ln.const != 0) or (ln.op == "<=" and ln.const > 0):
                return "unsat", None
            continue
        if ln.op == "=":
            ineqs.append(_Lin(ln.coeffs, ln.const, "<="))
            ineqs.append(_mk_lin({v: -c for v, c in ln.coeffs}, -ln.const, "<="))
        else:
            ineqs.append(ln)

    # Fourier-Motzkin elimination over the rationals, recording steps
    elim_steps: list[tuple[SymVar, list]] = []
    current = ineqs
    while True:
        vs: dict[SymVar, int] = {}
        for ln in current:
            for v, _ in ln.coeffs:
                vs[v] = vs.get(v, 0) + 1
        if not vs:
            break
        var = min(vs, key=lambda v: (vs[v], v.id))
        lower, upper, rest = [], [], []
        for ln in current:
            c = dict(ln.coeffs).get(var, 0)
            if c > 0:
                upper.append(ln)
            elif c < 0:
                lower.append(ln)
            else:
                rest.append(ln)
        elim_steps.append((var, lower + upper))
        new = rest
        for lo in lower:
            for up in upper:
                cl = dict(lo.coeffs)[var]
                cu = dict(up.coeffs)[var]
                # lo: cl*var + a <= 0 (cl<0)  ->  var >= a/(-cl)... combine scaled
                d: dict = {}
                for v, c in lo.coeffs:
                    if v != var:
                        d[v] = d.get(v, 0) + c * cu
                for v, c in up.coeffs:
                    if v != var:
                        d[v] = d.get(v, 0) + c * (-cl)
                k = lo.const * cu + up.const * (-cl)
                ln2 = _mk_lin(d, k, "<=")
                if not ln2.coeffs:
                    if ln2.const > 0:
                        return "unsat", None
                    continue
                new.append(ln2)
                if len(new) > cap:
                    return "unknown", None
        current = new
        for ln in current:
            if not ln.coeffs and ln.const > 0:
                return "unsat", None

    # rationally feasible: rebuild an integer model in reverse elimination order
    env: dict[SymVar, Fraction] = {}

    def lin_rest(ln: _Lin, var: SymVar) -> Fraction:
        # a variable can vanish from the system before being eliminated
        # itself (all its constraints consumed by another step); it is then
        # unconstrained at this point and pinned to 0
        s = Fraction(ln.const)
        for v, c in ln.coeffs:
            if v != var:
                s += c * env.setdefault(v, Fraction(0))
        return s

    for var, cons in reversed(elim_steps):
        lo_bound: Optional[Fraction] = None
        hi_bound: Optional[Fraction] = None
        for ln in cons:
            c = dict(ln.coeffs)[var]
            rest = lin_rest(ln, var)
            # c*var + rest <= 0
            bound = Fraction(-rest, c)
            if c > 0:
                hi_bound = bound if hi_bound is None else min(hi_bound, bound)
            else:
                lo_bound = bound if lo_bound is None else max(lo_bound, bound)
        if lo_bound is None and hi_bound is None:
            env[var] = Fraction(0)
        elif lo_bound is None:
            env[var] = Fraction(_floor(hi_bound))
        elif hi_bound is None:
            env[var] = Fraction(_ceil(lo_bound))
        else:
            lo_i, hi_i = _ceil(lo_bound), _floor(hi_bound)
            if lo_i > hi_i:
                return "unknown", None  # integer hole in the rational box
            env[var] = Fraction(0) if lo_i <= 0 <= hi_i else Fraction(lo_i)

    model = {v: int(x) for v, x in env.items()}
    # back-substitute eliminated equality variables; variables that vanished
    # from every constraint are unconstrained and default to 0
    for var, rep, repc in reversed(subs):
        val = repc
        for v, c in rep.items():
            if v not in model:
                model[v] = 0
            val += c * model[v]
        model[var] = val
    return "sat", model


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


# ---------------------------------------------------------------------------
# three-valued answers


class Entailment(Enum):
    VALID = "valid"
    NOT_VALID = "not_valid"
    UNKNOWN = "unknown"


class SatStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: SatStatus
    model: Optional[tuple] = None  # tuple[(SymVar, int)] sorted by id

    def model_dict(self) -> Optional[dict]:
        return dict(self.model) if self.model is not None else None


VALID = Entailment.VALID
NOT_VALID = Entailment.NOT_VALID
UNKNOWN = Entailment.UNKNOWN


def _components(phis: list) -> list[list]:
    """Partition a conjunction into variable-connected components.

    Ground formulas form their own singleton components.
    """
    groups: list[tuple[set, list]] = []
    out = []
    for p in phis:
        vs = set(formula_vars(p))
        if not vs:
            out.append([p])
            continue
        merged = [p]
        keep = []
        for gvs, gps in groups:
            if gvs & vs:
                vs |= gvs
                merged.extend(gps)
            else:
                keep.append((gvs, gps))
        keep.append((vs, merged))
        groups = keep
    out.extend(ps for _, ps in groups)
    return out


class Oracle:
    """Three-valued entailment and satisfiability over formula sets.

    All answers are sound: Valid and Unsat only when they truly hold,
    NotValid and Sat only with an evaluated model in hand.
    """

    def __init__(self, external=None, split_budget: int = 64, fm_cap: int = 3000):
        self.external = external
        self.split_budget = split_budget
        self.fm_cap = fm_cap
        self._sat_cache: dict = {}
        self._ent_cache: dict = {}

    # -- public API

    def satisfiable(self, phis: Iterable[Formula]) -> SatResult:
        key = frozenset(phis) if not isinstance(phis, frozenset) else phis
        hit = self._sat_cache.get(key)
        if hit is not None:
            return hit
        res = self._sat_uncached(sorted_formulas(key))
        if len(self._sat_cache) > 100_000:
            self._sat_cache.clear()
        self._sat_cache[key] = res
        return res

    def entails(self, hyp: Iterable[Formula], goal: Formula) -> Entailment:
        hyp_set = frozenset(hyp) if not isinstance(hyp, frozenset) else hyp
        key = (hyp_set, goal)
        hit = self._ent_cache.get(key)
        if hit is not None:
            return hit
        res = self._entails_uncached(hyp_set, goal)
        if len(self._ent_cache) > 200_000:
            self._ent_cache.clear()
        self._ent_cache[key] = res
        return res

    # -- internals

    def _sat_uncached(self, phis: list) -> SatResult:
        model: dict = {}
        unknown = False
        for comp in _components(phis):
            st, m = self._sat_component(comp)
            if st == "unsat":
                return SatResult(SatStatus.UNSAT)
            if st == "sat":
                model.update(m)
            else:
                unknown = True
        if unknown:
            if self.external is not None:
                ext = self._external_sat(phis)
                if ext is not None:
                    return ext
            return SatResult(SatStatus.UNKNOWN)
        # give every free variable a value
        for v in fset_vars(phis):
            model.setdefault(v, 0)
        return SatResult(SatStatus.SAT, tuple(sorted(model.items(), key=lambda kv: kv[0].id)))

    def _sat_component(self, phis: list) -> tuple[str, Optional[dict]]:
        branches = _split_branches([nnf(p) for p in phis], self.split_budget)
        if branches is None:
            return "unknown", None
        if not branches:
            return "unsat", None
        saw_unknown = False
        for branch in branches:
            lins: list[_Lin] = []
            nonlinear: list[Cmp] = []
            for atom in branch:
                ls = _atom_to_lins(atom)
                if ls is None:
                    nonlinear.append(atom)
                else:
                    lins.extend(ls)
            st, m = _solve_linear(lins, self.fm_cap)
            if st == "unsat":
                continue  # sound even with nonlinear atoms dropped: branch needs the linear part
            if st == "unknown":
                saw_unknown = True
                continue
            env = dict(m)
            for v in set().union(*[formula_vars(a) for a in branch]) if branch else set():
                env.setdefault(v, 0)
            if all(eval_formula(a, env) for a in branch):
                return "sat", env
            saw_unknown = True
        return ("unknown", None) if saw_unknown else ("unsat", None)

    def _entails_uncached(self, hyp: frozenset, goal: Formula) -> Entailment:
        if goal in hyp:
            return VALID
        if isinstance(goal, And) and goal.args:
            # a countermodel of one conjunct under the full hypothesis
            # refutes the whole conjunction
            results = [self.entails(hyp, g) for g in goal.args]
            if all(r is VALID for r in results):
                return VALID
            if any(r is NOT_VALID for r in results):
                return NOT_VALID
            return UNKNOWN
        goal_vars = formula_vars(goal)
        cone: list[Formula] = []
        rest: list[Formula] = []
        reach = set(goal_vars)
        pending = sorted_formulas(hyp)
        grew = True
        while grew:
            grew = False
            still = []
            for p in pending:
                vs = formula_vars(p)
                if vs & reach or not vs:
                    cone.append(p)
                    reach |= vs
                    grew = True
                else:
                    still.append(p)
            pending = still
        rest = pending

        neg = negate(goal)
        core = self.satisfiable(frozenset(cone) | {neg})
        if core.status is SatStatus.UNSAT:
            return VALID
        if core.status is SatStatus.SAT:
            if not rest:
                return NOT_VALID
            r = self.satisfiable(frozenset(rest))
            if r.status is SatStatus.SAT:
                return NOT_VALID
            if r.status is SatStatus.UNSAT:
                return VALID  # hypothesis itself inconsistent
            return UNKNOWN
        if self.external is not None:
            ext = self._external_entails(hyp, goal)
            if ext is not None:
                return ext
        return UNKNOWN

    # -- external solver hooks

    def _external_sat(self, phis: list) -> Optional[SatResult]:
        try:
            st, model = self.external.check(phis)
        except Exception:
            return None
        if st == "unsat":
            return SatResult(SatStatus.UNSAT)
        if st == "sat" and model is not None:
            env = dict(model)
            for v in fset_vars(phis):
                env.setdefault(v, 0)
            if all(eval_formula(p, env) for p in phis):
                return SatResult(SatStatus.SAT, tuple(sorted(env.items(), key=lambda kv: kv[0].id)))
        return None

    def _external_entails(self, hyp: frozenset, goal: Formula) -> Optional[Entailment]:
        try:
            st, _ = self.external.check(list(hyp) + [negate(goal)])
        except Exception:
            return None
        if st == "unsat":
            return VALID
        return None


DEFAULT_ORACLE = Oracle()


def entails(hyp: Iterable[Formula], goal: Formula, oracle: Optional[Oracle] = None) -> Entailment:
    return (oracle or DEFAULT_ORACLE).entails(hyp, goal)


def satisfiable(phis: Iterable[Formula], oracle: Optional[Oracle] = None) -> SatResult:
    return (oracle or DEFAULT_ORACLE).satisfiable(phis)


# ---------------------------------------------------------------------------
# SMT-LIB emission


def smt_symbol(v: SymVar) -> str:
    return f"v{v.id}"


def term_to_smtlib(t: Term) -> str:
    if isinstance(t, int):
        return str(t) if t >= 0 else f"(- {-t})"
    if isinstance(t, SymVar):
        return smt_symbol(t)
    op = t.op
    return f"({op} {term_to_smtlib(t.lhs)} {term_to_smtlib(t.rhs)})"


def formula_to_smtlib(phi: Formula) -> str:
    if isinstance(phi, Cmp):
        a, b = term_to_smtlib(phi.lhs), term_to_smtlib(phi.rhs)
        if phi.op == "=":
            return f"(= {a} {b})"
        if phi.op == "!=":
            return f"(not (= {a} {b}))"
        return f"({phi.op} {a} {b})"
    if isinstance(phi, Not):
        return f"(not {formula_to_smtlib(phi.arg)})"
    if isinstance(phi, And):
        if not phi.args:
            return "true"
        return "(and " + " ".join(formula_to_smtlib(a) for a in phi.args) + ")"
    if isinstance(phi, Or):
        if not phi.args:
            return "false"
        return "(or " + " ".join(formula_to_smtlib(a) for a in phi.args) + ")"
    if isinstance(phi, Implies):
        return f"(=> {formula_to_smtlib(phi.lhs)} {formula_to_smtlib(phi.rhs)})"
    raise TypeError(f"not a formula: {phi!r}")


def to_smtlib(phis: Iterable[Formula], logic: str = "QF_NIA") -> str:
    """Render a formula set as a self-contained SMT-LIB v2 script."""
    if isinstance(phis, (Cmp, Not, And, Or, Implies)):
        phis = [phis]
    phis = sorted_formulas(phis)
    lines = [f"(set-logic {logic})"]
    for v in sorted(fset_vars(phis), key=lambda v: v.id):
        lines.append(f"(declare-const {smt_symbol(v)} Int)")
    for p in phis:
        lines.append(f"(assert {formula_to_smtlib(p)})")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"
