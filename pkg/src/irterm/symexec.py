"""One-step symbolic execution rules.

Each rule consumes an abstract state whose topmost frame points at an
instruction and produces a step outcome: a successor state, a refinement
request when a comparison cannot be decided, or an error step when a memory
access cannot be proven safe.  Memory side conditions fail closed: whenever
the oracle cannot prove safety (or preservation of a points-to fact), the
rule errs resp. drops the fact.

Variable identities are recomputed by every rule through vi_update, which
keeps entries whose current variable survives and follows provable
equalities of the successor's state formula.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import ir, logic
from .astate import (
    ERR,
    AbstractState,
    Allocation,
    PointsTo,
    StackFrame,
    VarIdentity,
    VarSupply,
    al_star,
    mk_lv,
    state_formula,
    sym_vars,
)
from .ir import Alloca, Arith, Br, Call, Icmp, Load, Ret, Store, size_of
from .logic import Cmp, Entailment, Formula, Oracle, SymVar, conj, disj, eq, le, lt, ne, negate


@dataclass(frozen=True)
class Evaluated:
    state: AbstractState


@dataclass(frozen=True)
class NeedsRefinement:
    condition: Formula


@dataclass(frozen=True)
class ErrStep:
    reason: str


@dataclass(frozen=True)
class Returned:
    state: AbstractState


@dataclass(frozen=True)
class Called:
    state: AbstractState


StepOutcome = Union[Evaluated, NeedsRefinement, ErrStep, Returned, Called]

_PRED_OPS = {"eq": "=", "ne": "!=", "slt": "<", "sle": "<=", "sgt": ">", "sge": ">="}


def operand_value(frame: StackFrame, op) -> Union[int, SymVar]:
    """LV lookup extended to integer literals (mapped to themselves)."""
    if isinstance(op, int):
        return op
    v = frame.lv_get(op)
    if v is None:
        raise KeyError(f"variable {op} unbound in frame at {frame.pos}")
    return v


def vi_update(prev: AbstractState, next_state: AbstractState, oracle: Oracle) -> frozenset:
    """VI of the successor: surviving entries plus provably-equal variables.

    Equalities are taken from the variable-to-variable equality atoms of the
    successor's state formula, closed under transitivity; this
    under-approximates full entailment, which only costs precision.
    """
    nvars = sym_vars(next_state)
    phis = state_formula(next_state, oracle)

    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for phi in phis:
        if (
            isinstance(phi, Cmp)
            and phi.op == "="
            and isinstance(phi.lhs, SymVar)
            and isinstance(phi.rhs, SymVar)
        ):
            union(phi.lhs, phi.rhs)

    groups: dict = {}
    for w in nvars:
        groups.setdefault(find(w), set()).add(w)

    out = set()
    for e in prev.vi:
        if e.current_var in nvars:
            out.add(e)
        for w in groups.get(find(e.current_var), ()):
            out.add(VarIdentity(e.entry_var, w))
    return frozenset(out)


def _advance(s: AbstractState, program: ir.Program) -> tuple:
    return program.advance(s.pos)


def _with_top(s: AbstractState, frame: StackFrame) -> AbstractState:
    return s.replace(frames=(frame,) + s.frames[1:])


def _finish(prev: AbstractState, draft: AbstractState, oracle: Oracle) -> AbstractState:
    return draft.replace(vi=vi_update(prev, draft, oracle))


def _covering_allocation(
    s: AbstractState, addr: SymVar, nbytes: int, oracle: Oracle
) -> Optional[Allocation]:
    """An allocation provably containing [addr, addr+nbytes-1], if any."""
    phi = state_formula(s, oracle)
    end = addr if nbytes == 1 else addr + (nbytes - 1)
    for a in sorted(al_star(s), key=lambda a: (a.lower.id, a.upper.id)):
        if oracle.entails(phi, conj(le(a.lower, addr), le(end, a.upper))) is Entailment.VALID:
            return a
    return None


def _provably_disjoint(
    phi: frozenset, a1: SymVar, n1: int, a2: SymVar, n2: int, oracle: Oracle
) -> bool:
    end1 = a1 if n1 == 1 else a1 + (n1 - 1)
    end2 = a2 if n2 == 1 else a2 + (n2 - 1)
    return oracle.entails(phi, disj(lt(end1, a2), lt(end2, a1))) is Entailment.VALID


def _outside_allocation(phi: frozenset, p: PointsTo, a: Allocation, oracle: Oracle) -> bool:
    """Is [p.addr, p.addr+size-1] provably disjoint from [a.lower, a.upper]?"""
    n = size_of(p.ty)
    end = p.addr if n == 1 else p.addr + (n - 1)
    return oracle.entails(phi, disj(lt(end, a.lower), lt(a.upper, p.addr))) is Entailment.VALID


def eval_load(program, s, instr: Load, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    addr = operand_value(s.top, instr.addr)
    nbytes = size_of(instr.ty)
    if _covering_allocation(s, addr, nbytes, oracle) is None:
        return ErrStep(f"load from {instr.addr}: address not provably allocated")
    # reuse a known cell value when one is recorded for this address; a fresh
    # variable (and entry) appears only for a never-read cell
    phi = state_formula(s, oracle)
    w = None
    pt = s.pt
    for p in sorted(s.pt, key=lambda p: (p.addr.id, p.value.id)):
        if p.ty == instr.ty and oracle.entails(phi, eq(p.addr, addr)) is Entailment.VALID:
            w = p.value
            break
    lv = s.top.lv_map()
    kb = s.kb
    if w is None:
        w = supply.fresh(f"v_{instr.dest}")
        pt = s.pt | {PointsTo(addr, instr.ty, w)}
    elif w in {v for r, v in lv.items() if r != instr.dest}:
        # another register already holds the cell's variable; LV stays
        # injective by binding a fresh alias equated to it
        w2 = supply.fresh(f"v_{instr.dest}")
        kb = kb | {eq(w2, w)}
        w = w2
    lv[instr.dest] = w
    top = s.top.with_lv(lv, pos=_advance(s, program))
    draft = _with_top(s, top).replace(pt=pt, kb=kb)
    return Evaluated(_finish(s, draft, oracle))


def eval_store(program, s, instr: Store, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    addr = operand_value(s.top, instr.addr)
    nbytes = size_of(instr.ty)
    if _covering_allocation(s, addr, nbytes, oracle) is None:
        return ErrStep(f"store to {instr.addr}: address not provably allocated")
    kb = set(s.kb)
    val = operand_value(s.top, instr.value)
    if isinstance(val, int):
        # the store rule always introduces a fresh variable for the value
        w = supply.fresh(f"v_{instr.addr}_val")
        kb.add(eq(w, val))
        val = w
    phi = state_formula(s, oracle)
    kept = {
        p
        for p in s.pt
        if _provably_disjoint(phi, p.addr, size_of(p.ty), addr, nbytes, oracle)
    }
    top = s.top.with_lv(s.top.lv_map(), pos=_advance(s, program))
    draft = _with_top(s, top).replace(kb=kb, pt=kept | {PointsTo(addr, instr.ty, val)})
    return Evaluated(_finish(s, draft, oracle))


def eval_arith(program, s, instr: Arith, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    a = operand_value(s.top, instr.a)
    b = operand_value(s.top, instr.b)
    w = supply.fresh(f"v_{instr.dest}")
    op = {"add": "+", "sub": "-", "mul": "*"}[instr.op]
    term = logic.BinTerm(op, a, b)
    lv = s.top.lv_map()
    lv[instr.dest] = w
    top = s.top.with_lv(lv, pos=_advance(s, program))
    draft = _with_top(s, top).replace(kb=s.kb | {eq(w, term)})
    return Evaluated(_finish(s, draft, oracle))


def eval_icmp(program, s, instr: Icmp, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    a = operand_value(s.top, instr.a)
    b = operand_value(s.top, instr.b)
    cond = Cmp(_PRED_OPS[instr.pred], a, b)
    phi = state_formula(s, oracle)
    if oracle.entails(phi, cond) is Entailment.VALID:
        bit = 1
    elif oracle.entails(phi, negate(cond)) is Entailment.VALID:
        bit = 0
    else:
        return NeedsRefinement(cond)
    w = supply.fresh(f"v_{instr.dest}")
    lv = s.top.lv_map()
    lv[instr.dest] = w
    top = s.top.with_lv(lv, pos=_advance(s, program))
    draft = _with_top(s, top).replace(kb=s.kb | {eq(w, bit)})
    return Evaluated(_finish(s, draft, oracle))


def refine(s: AbstractState, cond: Formula, oracle: Oracle) -> tuple:
    """Case split: two successors with cond resp. its negation added to KB."""
    pos_draft = s.replace(kb=s.kb | {cond})
    neg_draft = s.replace(kb=s.kb | {negate(cond)})
    if pos_draft.kb == s.kb or neg_draft.kb == s.kb:
        # a vacuous split would loop the builder on an undecidable step
        raise ValueError(f"refinement on {cond!r} does not split the state")
    return (_finish(s, pos_draft, oracle), _finish(s, neg_draft, oracle))


def eval_br(program, s, instr: Br, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    if instr.cond is None:
        target, bindings = instr.then_block, instr.then_bindings
    else:
        c = operand_value(s.top, instr.cond)
        phi = state_formula(s, oracle)
        # the else check is the exact negation of the then check, so a
        # refinement split on eq(c, 1) is always decidable afterwards
        if oracle.entails(phi, eq(c, 1)) is Entailment.VALID:
            target, bindings = instr.then_block, instr.then_bindings
        elif oracle.entails(phi, ne(c, 1)) is Entailment.VALID:
            target, bindings = instr.else_block, instr.else_bindings
        else:
            return NeedsRefinement(eq(c, 1))
    lv = s.top.lv_map()
    kb = set(s.kb)
    # simultaneous phi assignment: values read in the pre-branch frame
    for pb in bindings:
        w = supply.fresh(f"v_{pb.dest}")
        kb.add(eq(w, operand_value(s.top, pb.value)))
        lv[pb.dest] = w
    top = s.top.with_lv(lv, pos=(target, 0))
    draft = _with_top(s, top).replace(kb=kb)
    return Evaluated(_finish(s, draft, oracle))


def eval_alloca(program, s, instr: Alloca, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    nbytes = size_of(instr.ty) * instr.count
    a1 = supply.fresh(f"v_{instr.dest}")
    a2 = supply.fresh(f"v_{instr.dest}_end")
    lv = s.top.lv_map()
    lv[instr.dest] = a1
    top = s.top.with_lv(lv, pos=_advance(s, program), allocs=s.top.allocs | {Allocation(a1, a2)})
    draft = _with_top(s, top).replace(kb=s.kb | {eq(a2, a1 + (nbytes - 1))})
    return Evaluated(_finish(s, draft, oracle))


def _eval_malloc(program, s, instr: Call, supply, oracle) -> StepOutcome:
    size = operand_value(s.top, instr.args[0][1])
    a1 = supply.fresh(f"v_{instr.dest}")
    a2 = supply.fresh(f"v_{instr.dest}_end")
    size_term = size - 1 if isinstance(size, int) else logic.BinTerm("-", size, 1)
    lv = s.top.lv_map()
    lv[instr.dest] = a1
    top = s.top.with_lv(lv, pos=_advance(s, program))
    draft = _with_top(s, top).replace(
        kb=s.kb | {eq(a2, logic.BinTerm("+", a1, size_term))},
        al=s.al | {Allocation(a1, a2)},
    )
    return Evaluated(_finish(s, draft, oracle))


def _eval_free(program, s, instr: Call, supply, oracle) -> StepOutcome:
    addr = operand_value(s.top, instr.args[0][1])
    phi = state_formula(s, oracle)
    hit = None
    for a in sorted(s.al, key=lambda a: (a.lower.id, a.upper.id)):
        if oracle.entails(phi, eq(a.lower, addr)) is Entailment.VALID:
            hit = a
            break
    if hit is None:
        return ErrStep(f"free({instr.args[0][1]}): no provably matching heap allocation")
    # points-to facts are kept only when provably outside the freed block
    kept = {p for p in s.pt if _outside_allocation(phi, p, hit, oracle)}
    top = s.top.with_lv(s.top.lv_map(), pos=_advance(s, program))
    draft = _with_top(s, top).replace(al=s.al - {hit}, pt=kept)
    return Evaluated(_finish(s, draft, oracle))


def _eval_nondet(program, s, instr: Call, supply, oracle) -> StepOutcome:
    w = supply.fresh(f"v_{instr.dest}")
    lv = s.top.lv_map()
    lv[instr.dest] = w
    top = s.top.with_lv(lv, pos=_advance(s, program))
    return Evaluated(_finish(s, _with_top(s, top), oracle))


def eval_call(program, s, instr: Call, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    if instr.callee == "malloc":
        return _eval_malloc(program, s, instr, supply, oracle)
    if instr.callee == "free":
        return _eval_free(program, s, instr, supply, oracle)
    if instr.callee == "nondet_int":
        return _eval_nondet(program, s, instr, supply, oracle)

    callee = program.function(instr.callee)
    kb = set(s.kb)
    lv_new = {}
    for (pname, _), (_, arg) in zip(callee.params, instr.args):
        v = supply.fresh(f"v_{pname}")
        kb.add(eq(v, operand_value(s.top, arg)))
        lv_new[pname] = v
    caller = s.top.with_lv(s.top.lv_map(), return_target=instr.dest)
    top = StackFrame((callee.entry_block, 0), mk_lv(lv_new))
    draft = s.replace(frames=(top, caller) + s.frames[1:], kb=kb)
    return Called(_finish(s, draft, oracle))


def eval_ret(program, s, instr: Ret, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    if s.size <= 1:
        raise ValueError("single-frame return states are leaves, not evaluated")
    popped = s.frames[0]
    caller = s.frames[1]
    phi = state_formula(s, oracle)
    # the popped frame's stack allocations disappear; points-to facts survive
    # only when provably outside every one of them
    kept = {
        p for p in s.pt if all(_outside_allocation(phi, p, a, oracle) for a in popped.allocs)
    }
    kb = set(s.kb)
    lv = caller.lv_map()
    if instr.value is not None and caller.return_target is not None:
        w = supply.fresh(f"v_{caller.return_target}")
        kb.add(eq(w, operand_value(popped, instr.value)))
        lv[caller.return_target] = w
    new_caller = caller.with_lv(lv, pos=program.advance(caller.pos), return_target=None)
    draft = s.replace(frames=(new_caller,) + s.frames[2:], kb=kb, pt=kept)
    return Returned(_finish(s, draft, oracle))


def step(program, s: AbstractState, supply: VarSupply, oracle: Oracle) -> StepOutcome:
    """Dispatch on the instruction at the topmost frame's position."""
    instr = program.instruction_at(s.pos)
    if isinstance(instr, Load):
        return eval_load(program, s, instr, supply, oracle)
    if isinstance(instr, Store):
        return eval_store(program, s, instr, supply, oracle)
    if isinstance(instr, Arith):
        return eval_arith(program, s, instr, supply, oracle)
    if isinstance(instr, Icmp):
        return eval_icmp(program, s, instr, supply, oracle)
    if isinstance(instr, Br):
        return eval_br(program, s, instr, supply, oracle)
    if isinstance(instr, Alloca):
        return eval_alloca(program, s, instr, supply, oracle)
    if isinstance(instr, Call):
        return eval_call(program, s, instr, supply, oracle)
    if isinstance(instr, Ret):
        return eval_ret(program, s, instr, supply, oracle)
    raise TypeError(f"no rule for {instr!r}")
