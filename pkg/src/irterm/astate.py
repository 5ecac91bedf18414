"""Abstract states for symbolic execution.

A state bundles a call stack, a knowledge base of integer constraints (KB),
heap allocations (AL), typed points-to facts (PT) and variable identities
(VI).  Each stack frame holds its program position, a partial injective map
from program variables to symbolic variables (LV) and its own stack
allocations.  ERR is the dedicated error state for undefined behavior.

state_formula computes the first-order view of a state: KB plus allocation
bounds, pairwise allocation disjointness, points-to address positivity, and
derived equalities/disequalities between points-to entries, iterated to a
least fixpoint.  sl_state_formula builds the stronger separation-logic view
used only by the representation checker.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Union

from . import logic, sl
from .ir import IrType, size_of
from .logic import (
    Cmp,
    Entailment,
    Formula,
    Instantiation,
    Oracle,
    SymVar,
    conj,
    disj,
    eq,
    fset,
    le,
    lt,
    ne,
    render_formula,
    sorted_formulas,
)


@dataclass(frozen=True)
class Allocation:
    lower: SymVar
    upper: SymVar

    def __repr__(self) -> str:
        return f"[[{self.lower!r},{self.upper!r}]]"


@dataclass(frozen=True)
class PointsTo:
    addr: SymVar
    ty: IrType
    value: SymVar

    def __repr__(self) -> str:
        return f"({self.addr!r} ->{self.ty!r} {self.value!r})"


@dataclass(frozen=True)
class VarIdentity:
    """entry_var had, at the preceding entry state, the value current_var has now."""

    entry_var: SymVar
    current_var: SymVar

    def __repr__(self) -> str:
        return f"{self.entry_var!r} ~> {self.current_var!r}"


@dataclass(frozen=True)
class StackFrame:
    pos: tuple  # (block, index)
    lv: tuple  # sorted tuple of (program var, SymVar)
    allocs: frozenset = frozenset()  # stack allocations of this frame
    return_target: Optional[str] = None  # caller variable awaiting a Ret value

    @cached_property
    def _lv_dict(self) -> dict:
        return dict(self.lv)

    @cached_property
    def _lv_dom(self) -> frozenset:
        return frozenset(self._lv_dict)

    def lv_map(self) -> dict:
        return dict(self._lv_dict)

    def lv_get(self, name: str) -> Optional[SymVar]:
        return self._lv_dict.get(name)

    def lv_dom(self) -> frozenset:
        return self._lv_dom

    def with_lv(self, mapping: dict, pos=None, allocs=None, return_target=...) -> "StackFrame":
        return StackFrame(
            self.pos if pos is None else pos,
            mk_lv(mapping),
            self.allocs if allocs is None else frozenset(allocs),
            self.return_target if return_target is ... else return_target,
        )


def mk_lv(mapping: dict) -> tuple:
    items = tuple(sorted(mapping.items()))
    vals = [v for _, v in items]
    if len(set(vals)) != len(vals):
        raise ValueError("LV must be injective")
    return items


class _ErrState:
    """Singleton error state; carries no components."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ERR"

    @property
    def is_err(self) -> bool:
        return True


ERR = _ErrState()


@dataclass(frozen=True)
class AbstractState:
    frames: tuple  # StackFrame tuple, index 0 = topmost
    kb: frozenset  # Formula set
    al: frozenset  # heap Allocations
    pt: frozenset  # PointsTo set
    vi: frozenset = frozenset()  # VarIdentity set

    @property
    def is_err(self) -> bool:
        return False

    @property
    def size(self) -> int:
        return len(self.frames)

    @property
    def top(self) -> StackFrame:
        return self.frames[0]

    @property
    def pos(self) -> tuple:
        return self.frames[0].pos

    def replace(self, **kw) -> "AbstractState":
        parts = {
            "frames": self.frames,
            "kb": self.kb,
            "al": self.al,
            "pt": self.pt,
            "vi": self.vi,
        }
        parts.update(kw)
        return AbstractState(
            tuple(parts["frames"]),
            frozenset(parts["kb"]),
            frozenset(parts["al"]),
            frozenset(parts["pt"]),
            frozenset(parts["vi"]),
        )


State = Union[AbstractState, _ErrState]


def al_star(s: AbstractState) -> frozenset:
    """All allocations of the state: heap ones plus every frame's stack ones."""
    out = set(s.al)
    for fr in s.frames:
        out |= fr.allocs
    return frozenset(out)


def sym_vars(s: AbstractState) -> frozenset:
    """Variables of cs/kb/al/pt (VI current vars are a subset, entry vars exempt)."""
    out: set[SymVar] = set()
    for fr in s.frames:
        for _, v in fr.lv:
            out.add(v)
        for a in fr.allocs:
            out.add(a.lower), out.add(a.upper)
    for phi in s.kb:
        out |= logic.formula_vars(phi)
    for a in s.al:
        out.add(a.lower), out.add(a.upper)
    for p in s.pt:
        out.add(p.addr), out.add(p.value)
    return frozenset(out)


class VarSupply:
    """Process-wide fresh symbolic variable factory."""

    def __init__(self, start: int = 0):
        self._counter = itertools.count(start)
        self._lock = threading.Lock()

    def fresh(self, hint: Optional[str] = None) -> SymVar:
        with self._lock:
            return SymVar(next(self._counter), hint)

    def fresh_vars(self, hints: Iterable[Optional[str]]) -> list:
        return [self.fresh(h) for h in hints]


# ---------------------------------------------------------------------------
# Def 2 state formula


_FORMULA_CACHE: dict = {}


def clear_caches() -> None:
    _FORMULA_CACHE.clear()


def state_formula(s: AbstractState, oracle: Optional[Oracle] = None) -> frozenset:
    """First-order formula set of a state, as a least fixpoint.

    Starts from KB plus the allocation and points-to axioms, then repeatedly
    derives value equalities (provably equal addresses of same-typed entries)
    and address disequalities (provably unequal values).  Unknown entailments
    derive nothing.  The result is cached per (frames, kb, al, pt).
    """
    if s.is_err:
        raise ValueError("ERR has no formula")
    oracle = oracle or logic.DEFAULT_ORACLE
    key = (id(oracle), s.frames, s.kb, s.al, s.pt)
    hit = _FORMULA_CACHE.get(key)
    if hit is not None:
        return hit

    base: set[Formula] = set(s.kb)
    allocs = sorted(al_star(s), key=lambda a: (a.lower.id, a.upper.id))
    for a in allocs:
        base.add(le(1, a.lower))
        base.add(le(a.lower, a.upper))
    for a, b in itertools.combinations(allocs, 2):
        base.add(disj(lt(a.upper, b.lower), lt(b.upper, a.lower)))
    pts = sorted(s.pt, key=lambda p: (p.addr.id, p.value.id, repr(p.ty)))
    for p in pts:
        base.add(le(1, p.addr))

    # fixpoint over derived equalities and disequalities
    rounds = 0
    cap = max(1, len(pts) * len(pts))
    changed = True
    while changed and rounds < cap:
        changed = False
        rounds += 1
        hyp = frozenset(base)
        for p, q in itertools.combinations(pts, 2):
            if p.ty != q.ty:
                continue
            eq_val = eq(p.value, q.value)
            if eq_val not in base and oracle.entails(hyp, eq(p.addr, q.addr)) is Entailment.VALID:
                base.add(eq_val)
                changed = True
            ne_addr = ne(p.addr, q.addr)
            if ne_addr not in base and oracle.entails(hyp, ne(p.value, q.value)) is Entailment.VALID:
                base.add(ne_addr)
                changed = True

    result = frozenset(base)
    _FORMULA_CACHE[key] = result
    return result


def sl_state_formula(s: AbstractState, oracle: Optional[Oracle] = None) -> sl.SLFormula:
    """Separation-logic view: ⟨s⟩ ∧ CS equations ∧ (∗ allocations) ∧ (⋀ points-to)."""
    if s.is_err:
        raise ValueError("ERR has no formula")
    pure = [sl.SLPure(phi) for phi in sorted_formulas(state_formula(s, oracle))]
    cs_eqs = []
    for i, fr in enumerate(s.frames, start=1):
        for name, v in fr.lv:
            cs_eqs.append(sl.SLPure(Cmp("=", sl.PVar(name, i), v)))
    alloc_clauses = sl.SLSep(
        tuple(
            sl.SLAlloc(a.lower, a.upper)
            for a in sorted(al_star(s), key=lambda a: (a.lower.id, a.upper.id))
        )
    )
    pt_clauses = [
        sl.SLBytes(p.addr, p.value, size_of(p.ty))
        for p in sorted(s.pt, key=lambda p: (p.addr.id, p.value.id, repr(p.ty)))
    ]
    return sl.SLAnd(tuple(pure + cs_eqs + [alloc_clauses] + pt_clauses))


# ---------------------------------------------------------------------------
# renaming


def rename(s: AbstractState, delta: Instantiation) -> AbstractState:
    """Applies a variable renaming to every component, VI current vars included.

    delta must be an injective variable-to-variable map on the state's
    variables; VI entry vars name entry-state variables and stay fixed.
    """
    if not delta.is_var_map():
        raise ValueError("renaming must map variables to variables")
    dom_vars = sym_vars(s)
    relevant = {v: delta.get(v, v) for v in dom_vars}
    imgs = list(relevant.values())
    if len(set(imgs)) != len(imgs):
        raise ValueError("renaming must be injective on the state's variables")

    def m(v: SymVar) -> SymVar:
        return relevant.get(v, v)

    frames = tuple(
        StackFrame(
            fr.pos,
            tuple((name, m(v)) for name, v in fr.lv),
            frozenset(Allocation(m(a.lower), m(a.upper)) for a in fr.allocs),
            fr.return_target,
        )
        for fr in s.frames
    )
    kb = frozenset(logic.apply(delta, phi) for phi in s.kb)
    al = frozenset(Allocation(m(a.lower), m(a.upper)) for a in s.al)
    pt = frozenset(PointsTo(m(p.addr), p.ty, m(p.value)) for p in s.pt)
    vi = frozenset(VarIdentity(e.entry_var, m(e.current_var)) for e in s.vi)
    return AbstractState(frames, kb, al, pt, vi)


# ---------------------------------------------------------------------------
# state kind predicates (program-dependent)


def is_return_state(program, s: State) -> bool:
    if s.is_err or s.size != 1:
        return False
    block, idx = s.pos
    instr = program.instruction_at(s.pos)
    return type(instr).__name__ == "Ret"


def is_call_state(program, s: State) -> bool:
    if s.is_err or s.size <= 1:
        return False
    return program.is_initial(s.pos)


def is_entry_shaped(program, s: State) -> bool:
    """Single frame at a function's initial position (entry modulo edge checks)."""
    return not s.is_err and s.size == 1 and program.is_initial(s.pos)


# ---------------------------------------------------------------------------
# serialization


def _var_json(v: SymVar) -> str:
    return repr(v)


def state_to_json(s: State) -> dict:
    if s.is_err:
        return {"err": True}
    return {
        "frames": [
            {
                "pos": list(fr.pos),
                "lv": {name: _var_json(v) for name, v in fr.lv},
                "allocs": sorted(
                    [[_var_json(a.lower), _var_json(a.upper)] for a in fr.allocs]
                ),
                "return_target": fr.return_target,
            }
            for fr in s.frames
        ],
        "kb": [render_formula(phi) for phi in sorted_formulas(s.kb)],
        "al": sorted([[_var_json(a.lower), _var_json(a.upper)] for a in s.al]),
        "pt": sorted(
            [[_var_json(p.addr), repr(p.ty), _var_json(p.value)] for p in s.pt]
        ),
        "vi": sorted(
            [[_var_json(e.entry_var), _var_json(e.current_var)] for e in s.vi]
        ),
    }


def state_json_text(s: State) -> str:
    return json.dumps(state_to_json(s), sort_keys=True, separators=(",", ":"))
