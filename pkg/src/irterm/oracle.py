"""Ground-truth side of the analysis: a concrete interpreter over byte
memory, representation checkers, and a lockstep simulation harness.

A concrete state is an abstract state of a special shape: its formula pins
every symbolic variable to one integer, points-to entries are single signed
bytes, and every allocated address carries exactly one byte.  The
interpreter executes real integer and byte semantics on such states;
undefined behavior (out-of-allocation access, invalid free) yields ERR, and
nondet_int draws from a seeded generator.

represents checks that a concrete state is an instance of an abstract one
under a closing assignment sigma: equal stack shape, the interpretation
(variable assignment plus byte memory) models the abstract state's
separation-logic formula, and every abstract allocation is realized in the
same stack frame.  The weak variant compares against the context abstraction
of the concrete state, so deeper concrete stacks still match.

simulate drives a concrete run and a graph path together: evaluation edges
consume one concrete step, refinement/generalization/call-abstraction edges
none, and an intersection edge swallows the callee's whole concrete sub-run.
A run that ends without a weakly-representing graph node is a mismatch, the
executable failure signal for the graph construction's soundness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

from . import ir, logic, sl
from .astate import (
    ERR,
    AbstractState,
    Allocation,
    PointsTo,
    StackFrame,
    State,
    VarSupply,
    al_star,
    mk_lv,
    sl_state_formula,
    state_formula,
    sym_vars,
)
from .ir import Alloca, Arith, Br, Call, Icmp, Load, Ret, Store, int_type, size_of
from .logic import (
    DEFAULT_ORACLE,
    Cmp,
    Entailment,
    Oracle,
    SatStatus,
    SymVar,
    eq,
    eval_term,
    formula_vars,
    sorted_formulas,
    subst_formula,
)
from .seg import CALLABS, EVAL, GEN, INTERSECT, REFINE, Seg, context_abstraction
from .sl import PVar, SlEvalError, decode_bytes, encode_bytes

I8 = int_type(8)


@dataclass(frozen=True)
class Halted:
    """The outermost frame returned; value is None for void."""

    value: Optional[int] = None


StepResult = Union[State, Halted]


# ---------------------------------------------------------------------------
# concrete environments


def concrete_env(c: AbstractState, oracle: Optional[Oracle] = None) -> dict:
    """The unique integer value of every variable of a concrete state.

    Interpreter-built states pin each variable with a direct v = n atom; for
    other shapes the state formula is solved and uniqueness of each value is
    verified by entailment.
    """
    env: dict = {}
    for phi in c.kb:
        if isinstance(phi, Cmp) and phi.op == "=":
            if isinstance(phi.lhs, SymVar) and isinstance(phi.rhs, int):
                env[phi.lhs] = phi.rhs
            elif isinstance(phi.rhs, SymVar) and isinstance(phi.lhs, int):
                env[phi.rhs] = phi.lhs
    missing = sym_vars(c) - set(env)
    if not missing:
        return env

    oracle = oracle or DEFAULT_ORACLE
    phi_c = state_formula(c, oracle)
    res = oracle.satisfiable(phi_c)
    if res.status is not SatStatus.SAT or res.model is None:
        raise ValueError("state formula has no model; not a concrete state")
    model = res.model_dict()
    for v in sorted(missing, key=lambda v: v.id):
        n = model.get(v)
        if n is None or oracle.entails(phi_c, eq(v, n)) is not Entailment.VALID:
            raise ValueError(f"variable {v!r} is not uniquely valued")
        env[v] = n
    return env


def concrete_violations(c: State, oracle: Optional[Oracle] = None) -> list:
    """Reasons a state fails to be concrete; empty when it is one.

    Clauses: satisfiable formula, every variable uniquely valued, only
    single-byte points-to entries with values in signed byte range, every
    points-to address allocated, and every allocated address carrying
    exactly one byte entry.
    """
    if c.is_err:
        return []
    oracle = oracle or DEFAULT_ORACLE
    out = []
    phi_c = state_formula(c, oracle)
    res = oracle.satisfiable(phi_c)
    if res.status is not SatStatus.SAT:
        return [f"state formula not satisfiable ({res.status.value})"]
    model = res.model_dict() or {}
    env: dict = {}
    for v in sorted(sym_vars(c), key=lambda v: v.id):
        n = model.get(v, 0)
        if oracle.entails(phi_c, eq(v, n)) is not Entailment.VALID:
            out.append(f"variable {v!r} not uniquely valued")
        else:
            env[v] = n
    if out:
        return out

    for p in sorted(c.pt, key=lambda p: env[p.addr]):
        if p.ty != I8:
            out.append(f"points-to entry at {env[p.addr]} has type {p.ty!r}, not i8")
        if not -128 <= env[p.value] <= 127:
            out.append(f"byte value {env[p.value]} at {env[p.addr]} out of range")

    intervals = sorted((env[a.lower], env[a.upper]) for a in al_star(c))
    by_addr: dict = {}
    for p in c.pt:
        by_addr[env[p.addr]] = by_addr.get(env[p.addr], 0) + 1
    for addr in sorted(by_addr):
        if not any(lo <= addr <= hi for lo, hi in intervals):
            out.append(f"points-to address {addr} outside every allocation")
    for lo, hi in intervals:
        for addr in range(lo, hi + 1):
            n = by_addr.get(addr, 0)
            if n != 1:
                out.append(f"allocated address {addr} carries {n} byte entries")
    return out


def is_concrete(c: State, oracle: Optional[Oracle] = None) -> bool:
    return not concrete_violations(c, oracle)


# ---------------------------------------------------------------------------
# interpretations


@dataclass
class Interpretation:
    """Assignment of frame-indexed program variables plus byte memory."""

    assigns: dict  # PVar -> int
    mem: dict  # address -> unsigned byte in [0, 255]


def interpretation_of(c: AbstractState, oracle: Optional[Oracle] = None) -> Interpretation:
    env = concrete_env(c, oracle)
    assigns = {
        PVar(name, i): env[v]
        for i, fr in enumerate(c.frames, start=1)
        for name, v in fr.lv
    }
    mem = {env[p.addr]: env[p.value] % 256 for p in c.pt}
    return Interpretation(assigns, mem)


def sl_holds(interp: Interpretation, phi: sl.SLFormula, sigma: Mapping[SymVar, int]) -> bool:
    """Does (assigns, mem) model phi with symbolic variables closed by sigma?

    Raises SlEvalError when a variable stays unbound; never silently false.
    """
    env = dict(interp.assigns)
    env.update(sigma)
    return sl.sl_holds(interp.mem, phi, env)


# ---------------------------------------------------------------------------
# the interpreter


def _env_of(c: AbstractState) -> dict:
    env = {}
    for phi in c.kb:
        if isinstance(phi, Cmp) and phi.op == "=":
            if isinstance(phi.lhs, SymVar) and isinstance(phi.rhs, int):
                env[phi.lhs] = phi.rhs
            elif isinstance(phi.rhs, SymVar) and isinstance(phi.lhs, int):
                env[phi.rhs] = phi.lhs
    return env


def _repack(frames, al, pt, env) -> AbstractState:
    """Rebuild a concrete state with its knowledge base compacted to one
    pinning atom per live variable."""
    live = set()
    for fr in frames:
        live.update(v for _, v in fr.lv)
        for a in fr.allocs:
            live.add(a.lower), live.add(a.upper)
    for a in al:
        live.add(a.lower), live.add(a.upper)
    for p in pt:
        live.add(p.addr), live.add(p.value)
    kb = frozenset(eq(v, env[v]) for v in live)
    return AbstractState(tuple(frames), kb, frozenset(al), frozenset(pt), frozenset())


def _operand(frame: StackFrame, env: dict, op) -> int:
    if isinstance(op, int):
        return op
    v = frame.lv_get(op)
    if v is None:
        raise KeyError(f"variable {op} unbound at {frame.pos}")
    return env[v]


def _alloc_values(env: dict, allocs) -> list:
    return sorted((env[a.lower], env[a.upper]) for a in allocs)


def _covering(env: dict, c: AbstractState, addr: int, nbytes: int) -> bool:
    return any(
        lo <= addr and addr + nbytes - 1 <= hi
        for lo, hi in _alloc_values(env, al_star(c))
    )


def _next_region(env: dict, c: AbstractState, nbytes: int) -> int:
    """A deterministic fresh address range, one cell of slack between blocks."""
    top = 0
    for _, hi in _alloc_values(env, al_star(c)):
        top = max(top, hi)
    return top + 2


def _fresh_bytes(supply: VarSupply, env: dict, pt: set, lo: int, nbytes: int, data=None):
    """Add one byte entry per address in [lo, lo+nbytes); data defaults to zeros."""
    for k in range(nbytes):
        a = supply.fresh(f"c_a{lo + k}")
        v = supply.fresh(f"c_m{lo + k}")
        env[a] = lo + k
        env[v] = 0 if data is None else decode_bytes([data[k]])
        pt.add(PointsTo(a, I8, v))


def interp_step(
    program: ir.Program,
    c: AbstractState,
    supply: VarSupply,
    nondet: Callable[[], int],
) -> StepResult:
    """One concrete step; returns the next state, ERR, or Halted."""
    env = _env_of(c)
    instr = program.instruction_at(c.pos)
    top = c.top
    frames = list(c.frames)
    al = set(c.al)
    pt = set(c.pt)

    def bind(dest: str, value: int, pos=None) -> AbstractState:
        w = supply.fresh(f"c_{dest}")
        env[w] = value
        lv = top.lv_map()
        lv[dest] = w
        frames[0] = top.with_lv(lv, pos=pos or program.advance(c.pos))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Arith):
        a = _operand(top, env, instr.a)
        b = _operand(top, env, instr.b)
        value = {"add": a + b, "sub": a - b, "mul": a * b}[instr.op]
        return bind(instr.dest, value)

    if isinstance(instr, Icmp):
        a = _operand(top, env, instr.a)
        b = _operand(top, env, instr.b)
        preds = {
            "eq": a == b,
            "ne": a != b,
            "slt": a < b,
            "sle": a <= b,
            "sgt": a > b,
            "sge": a >= b,
        }
        return bind(instr.dest, int(preds[instr.pred]))

    if isinstance(instr, Br):
        if instr.cond is None:
            taken = True
        else:
            # conditions are icmp results; the then edge fires exactly on 1
            taken = _operand(top, env, instr.cond) == 1
        target = instr.then_block if taken else instr.else_block
        bindings = instr.then_bindings if taken else instr.else_bindings
        lv = top.lv_map()
        # simultaneous assignment: all values read before any binding lands
        values = [(pb.dest, _operand(top, env, pb.value)) for pb in bindings]
        for dest, value in values:
            w = supply.fresh(f"c_{dest}")
            env[w] = value
            lv[dest] = w
        frames[0] = top.with_lv(lv, pos=(target, 0))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Load):
        addr = _operand(top, env, instr.addr)
        nbytes = size_of(instr.ty)
        if not _covering(env, c, addr, nbytes):
            return ERR
        data = []
        for k in range(addr, addr + nbytes):
            hit = [p for p in pt if env[p.addr] == k]
            if not hit:
                return ERR
            data.append(env[hit[0].value] % 256)
        return bind(instr.dest, decode_bytes(data))

    if isinstance(instr, Store):
        addr = _operand(top, env, instr.addr)
        nbytes = size_of(instr.ty)
        if not _covering(env, c, addr, nbytes):
            return ERR
        value = _operand(top, env, instr.value)
        data = encode_bytes(value, nbytes)
        pt = {p for p in pt if not addr <= env[p.addr] < addr + nbytes}
        _fresh_bytes(supply, env, pt, addr, nbytes, data)
        frames[0] = top.with_lv(top.lv_map(), pos=program.advance(c.pos))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Alloca):
        nbytes = size_of(instr.ty) * instr.count
        lo = _next_region(env, c, nbytes)
        a1 = supply.fresh(f"c_{instr.dest}")
        a2 = supply.fresh(f"c_{instr.dest}_end")
        env[a1] = lo
        env[a2] = lo + nbytes - 1
        _fresh_bytes(supply, env, pt, lo, nbytes)
        lv = top.lv_map()
        lv[instr.dest] = a1
        frames[0] = top.with_lv(
            lv,
            pos=program.advance(c.pos),
            allocs=top.allocs | {Allocation(a1, a2)},
        )
        return _repack(frames, al, pt, env)

    if isinstance(instr, Call) and instr.callee == "malloc":
        nbytes = _operand(top, env, instr.args[0][1])
        if nbytes <= 0:
            return ERR
        lo = _next_region(env, c, nbytes)
        a1 = supply.fresh(f"c_{instr.dest}")
        a2 = supply.fresh(f"c_{instr.dest}_end")
        env[a1] = lo
        env[a2] = lo + nbytes - 1
        al.add(Allocation(a1, a2))
        _fresh_bytes(supply, env, pt, lo, nbytes)
        lv = top.lv_map()
        lv[instr.dest] = a1
        frames[0] = top.with_lv(lv, pos=program.advance(c.pos))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Call) and instr.callee == "free":
        addr = _operand(top, env, instr.args[0][1])
        hit = next((a for a in sorted(al, key=lambda a: env[a.lower]) if env[a.lower] == addr), None)
        if hit is None:
            return ERR
        lo, hi = env[hit.lower], env[hit.upper]
        al.discard(hit)
        pt = {p for p in pt if not lo <= env[p.addr] <= hi}
        frames[0] = top.with_lv(top.lv_map(), pos=program.advance(c.pos))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Call) and instr.callee == "nondet_int":
        return bind(instr.dest, nondet())

    if isinstance(instr, Call):
        callee = program.function(instr.callee)
        lv_new = {}
        for (pname, _), (_, arg) in zip(callee.params, instr.args):
            w = supply.fresh(f"c_{pname}")
            env[w] = _operand(top, env, arg)
            lv_new[pname] = w
        frames[0] = top.with_lv(top.lv_map(), return_target=instr.dest)
        frames.insert(0, StackFrame((callee.entry_block, 0), mk_lv(lv_new)))
        return _repack(frames, al, pt, env)

    if isinstance(instr, Ret):
        value = None if instr.value is None else _operand(top, env, instr.value)
        if c.size == 1:
            return Halted(value)
        popped = frames.pop(0)
        for a in popped.allocs:
            lo, hi = env[a.lower], env[a.upper]
            pt = {p for p in pt if not lo <= env[p.addr] <= hi}
        caller = frames[0]
        lv = caller.lv_map()
        if value is not None and caller.return_target is not None:
            w = supply.fresh(f"c_{caller.return_target}")
            env[w] = value
            lv[caller.return_target] = w
        frames[0] = caller.with_lv(lv, pos=program.advance(caller.pos), return_target=None)
        return _repack(frames, al, pt, env)

    raise TypeError(f"no concrete rule for {instr!r}")


def initial_concrete(program: ir.Program, fname: str, args: Iterable[int] = ()) -> AbstractState:
    """Single-frame concrete state at a function's entry, integer args bound."""
    fn = program.function(fname)
    args = list(args)
    if len(args) != len(fn.params):
        raise ValueError(f"{fname} takes {len(fn.params)} arguments, got {len(args)}")
    supply = VarSupply()
    lv = {}
    kb = set()
    for (pname, _), n in zip(fn.params, args):
        v = supply.fresh(f"c_{pname}")
        kb.add(eq(v, n))
        lv[pname] = v
    frame = StackFrame(program.initial_position(fname), mk_lv(lv))
    return AbstractState((frame,), frozenset(kb), frozenset(), frozenset(), frozenset())


class Interpreter:
    """Stateful convenience wrapper: seeded nondets (logged) plus a supply."""

    def __init__(
        self,
        program: ir.Program,
        seed: int = 0,
        supply: Optional[VarSupply] = None,
        nondet_range: tuple = (-32, 32),
    ):
        self.program = program
        self.supply = supply or VarSupply(1_000_000)
        self.rng = random.Random(seed)
        self.nondet_range = nondet_range
        self.nondet_log: list = []

    def _nondet(self) -> int:
        v = self.rng.randint(*self.nondet_range)
        self.nondet_log.append(v)
        return v

    def step(self, c: AbstractState) -> StepResult:
        return interp_step(self.program, c, self.supply, self._nondet)

    def run(self, c: AbstractState, max_steps: int = 10_000):
        """Run to Halted/ERR or the step budget; returns (result, steps)."""
        steps = 0
        while steps < max_steps:
            out = self.step(c)
            steps += 1
            if out is ERR or isinstance(out, Halted):
                return out, steps
            c = out
        return c, steps


# ---------------------------------------------------------------------------
# representation


def represents(
    s: State,
    c: State,
    sigma: Mapping[SymVar, int],
    oracle: Optional[Oracle] = None,
) -> bool:
    """Is the concrete state an instance of the abstract one under sigma?

    ERR is represented only by ERR.  Frames must agree pairwise on position,
    variable domain and pending return target; the concrete interpretation
    must model sigma applied to the abstract separation-logic formula; and
    each abstract allocation must be realized by a concrete one in the same
    frame (heap against heap), which keeps frame lifetimes honest.
    """
    oracle = oracle or DEFAULT_ORACLE
    if s.is_err or c.is_err:
        return s.is_err and c.is_err
    if s.size != c.size:
        return False
    for fs, fc in zip(s.frames, c.frames):
        if fs.pos != fc.pos or fs.lv_dom() != fc.lv_dom():
            return False
        if fs.return_target != fc.return_target:
            return False
    interp = interpretation_of(c, oracle)
    if not sl_holds(interp, sl_state_formula(s, oracle), sigma):
        return False
    env = concrete_env(c, oracle)

    def frame_al(st, i):
        return st.al if i == 0 else st.frames[i - 1].allocs

    for i in range(0, s.size + 1):
        concrete = _alloc_values(env, frame_al(c, i))
        for a in frame_al(s, i):
            lo, hi = sigma.get(a.lower), sigma.get(a.upper)
            if lo is None or hi is None:
                raise SlEvalError(f"sigma leaves allocation bound {a!r} unbound")
            if (lo, hi) not in concrete:
                return False
    return True


def weakly_represents(
    s: State,
    c: State,
    sigma: Mapping[SymVar, int],
    oracle: Optional[Oracle] = None,
) -> bool:
    """represents against the |s|-frame context abstraction of c."""
    if s.is_err or c.is_err:
        return s.is_err and c.is_err
    if c.size < s.size:
        return False
    return represents(s, context_abstraction(c, s.size), sigma, oracle)


# ---------------------------------------------------------------------------
# sigma threading


def _extend_sigma(
    sbar: AbstractState,
    c: AbstractState,
    sigma: Mapping[SymVar, int],
    oracle: Oracle,
) -> Optional[dict]:
    """A closing assignment for sbar's variables against the concrete state.

    Kept variables keep their sigma values; new ones are read off the
    concrete state position by position: register slots from the concrete
    frame, allocation bounds from the matching concrete block, points-to
    values by decoding the bytes at the (already known) address.  Variables
    visible only in the knowledge base are solved from equality atoms and,
    as a last resort, from a model of the instantiated state formula: they
    do not touch the interpretation, so any consistent value is as good.
    """
    if c.size < sbar.size:
        return None
    cabs = context_abstraction(c, sbar.size)
    env = concrete_env(c, oracle)
    want = sym_vars(sbar)
    out = {v: sigma[v] for v in want if v in sigma}

    for fs, fc in zip(sbar.frames, cabs.frames):
        for name, v in fs.lv:
            if v in out:
                continue
            w = fc.lv_get(name)
            if w is None:
                return None
            out[v] = env[w]

    def frame_al(st, i):
        return st.al if i == 0 else st.frames[i - 1].allocs

    for i in range(0, sbar.size + 1):
        concrete = _alloc_values(env, frame_al(cabs, i))
        for a in sorted(frame_al(sbar, i), key=lambda a: (a.lower.id, a.upper.id)):
            if a.lower in out and a.upper not in out:
                hit = next((hi for lo, hi in concrete if lo == out[a.lower]), None)
                if hit is None:
                    return None
                out[a.upper] = hit

    mem = {env[p.addr]: env[p.value] % 256 for p in cabs.pt}
    for p in sorted(sbar.pt, key=lambda p: (p.addr.id, p.value.id)):
        if p.addr in out and p.value not in out:
            data = [mem.get(out[p.addr] + k) for k in range(size_of(p.ty))]
            if any(b is None for b in data):
                return None
            out[p.value] = decode_bytes(data)

    # equality atoms propagate values to bookkeeping variables
    changed = True
    while changed:
        changed = False
        for phi in sorted_formulas(sbar.kb):
            if not (isinstance(phi, Cmp) and phi.op == "="):
                continue
            for var_side, term_side in ((phi.lhs, phi.rhs), (phi.rhs, phi.lhs)):
                if isinstance(var_side, SymVar) and var_side not in out:
                    try:
                        out[var_side] = eval_term(term_side, out)
                        changed = True
                    except (KeyError, TypeError):
                        pass

    missing = want - set(out)
    if missing:
        inst = {v: out[v] for v in out}
        phis = [subst_formula(p, inst) for p in state_formula(sbar, oracle)]
        res = oracle.satisfiable(frozenset(phis))
        if res.status is not SatStatus.SAT:
            return None
        model = res.model_dict() or {}
        for v in missing:
            out[v] = model.get(v, 0)
    return out


def _sigma_through_gen(mu, sigma: Mapping[SymVar, int], target: AbstractState) -> Optional[dict]:
    out = {}
    for v in sym_vars(target):
        t = mu.get(v)
        if t is None:
            return None
        try:
            out[v] = eval_term(t, sigma)
        except KeyError:
            return None
    return out


# ---------------------------------------------------------------------------
# lockstep simulation


@dataclass
class SimulationReport:
    ok: bool
    outcome: str  # halted | err | leaf | absorbed_err | budget | mismatch
    reason: str = ""
    steps: int = 0
    matches: list = field(default_factory=list)  # (concrete steps so far, node id)
    value: Optional[int] = None  # return value when outcome == halted


def _node_of(g: Seg, s0) -> int:
    if isinstance(s0, int):
        return s0
    for nid, st in g.nodes.items():
        if st == s0:
            return nid
    raise ValueError("state not found in the graph")


def simulate(
    g: Seg,
    c0: State,
    s0,
    sigma0: Mapping[SymVar, int],
    max_steps: int = 2_000,
    seed: int = 0,
    oracle: Optional[Oracle] = None,
    interp: Optional[Interpreter] = None,
) -> SimulationReport:
    """Advance a concrete run and a graph path in lockstep.

    The graph node must weakly represent the concrete state at every match
    point; the first failure to re-establish that is reported as a mismatch
    with the path so far in `matches`.
    """
    oracle = oracle or DEFAULT_ORACLE
    program = g.program
    interp = interp or Interpreter(program, seed=seed)
    node = _node_of(g, s0)
    c = c0
    sigma = dict(sigma0)
    steps = 0
    matches: list = []

    def report(ok, outcome, reason="", value=None):
        return SimulationReport(ok, outcome, reason, steps, matches, value)

    if not weakly_represents(g.state(node), c, sigma, oracle):
        return report(False, "mismatch", "initial state not weakly represented")
    matches.append((0, node))

    while True:
        s = g.state(node)
        if s.is_err:
            return report(True, "err")
        outs = g.out_edges(node)
        gens = [e for e in outs if e.kind == GEN]
        refines = [e for e in outs if e.kind == REFINE]
        evals = [e for e in outs if e.kind == EVAL]
        inters = sorted(
            (e for e in outs if e.kind == INTERSECT),
            key=lambda e: (e.ret_id or 0, e.dst),
        )
        cabs = [e for e in outs if e.kind == CALLABS]

        if gens and not (refines or evals or inters or cabs):
            moved = False
            for e in sorted(gens, key=lambda e: e.dst):
                sig2 = _sigma_through_gen(e.mu, sigma, g.state(e.dst))
                if sig2 is not None and weakly_represents(g.state(e.dst), c, sig2, oracle):
                    node, sigma = e.dst, sig2
                    matches.append((steps, node))
                    moved = True
                    break
            if not moved:
                return report(False, "mismatch", f"no generalization from node {node} matches")
            continue

        if refines:
            for e in sorted(refines, key=lambda e: e.dst):
                if weakly_represents(g.state(e.dst), c, sigma, oracle):
                    node = e.dst
                    matches.append((steps, node))
                    break
            else:
                return report(False, "mismatch", f"no refinement branch at node {node} matches")
            continue

        if inters or cabs:
            depth = c.size
            snapshot = (c, steps, interp.rng.getstate(), len(interp.nondet_log))
            c_ret = None
            while steps < max_steps:
                if (
                    c.size == depth
                    and isinstance(program.instruction_at(c.pos), Ret)
                ):
                    c_ret = c
                    break
                out = interp.step(c)
                steps += 1
                if out is ERR or isinstance(out, Halted):
                    c_ret = out
                    break
                c = out
            if c_ret is not None and not (c_ret is ERR or isinstance(c_ret, Halted)):
                for e in inters:
                    sig2 = _extend_sigma(g.state(e.dst), c_ret, sigma, oracle)
                    if sig2 is not None and weakly_represents(g.state(e.dst), c_ret, sig2, oracle):
                        node, c, sigma = e.dst, c_ret, sig2
                        matches.append((steps, node))
                        break
                else:
                    return report(
                        False, "mismatch", f"no intersection at node {node} matches the return"
                    )
                continue
            # no intersectable return: rewind and walk into the callee
            c, steps, rng_state, log_len = snapshot
            interp.rng.setstate(rng_state)
            del interp.nondet_log[log_len:]
            if not cabs:
                return report(False, "mismatch", f"call at node {node} has no abstraction edge")
            e = cabs[0]
            sub = g.state(e.dst)
            sig2 = {v: sigma[v] for v in sym_vars(sub) if v in sigma}
            if not weakly_represents(sub, c, sig2, oracle):
                return report(False, "mismatch", f"call abstraction at node {node} does not match")
            node, sigma = e.dst, sig2
            matches.append((steps, node))
            continue

        if evals:
            if steps >= max_steps:
                return report(True, "budget", "step budget exhausted")
            out = interp.step(c)
            steps += 1
            err_edges = [e for e in evals if g.state(e.dst).is_err]
            plain = [e for e in evals if not g.state(e.dst).is_err]
            if out is ERR:
                if err_edges:
                    node = err_edges[0].dst
                    matches.append((steps, node))
                    return report(True, "err")
                return report(False, "mismatch", f"concrete fault at node {node} not covered")
            if isinstance(out, Halted):
                return report(False, "mismatch", f"unexpected halt during evaluation at {node}")
            for e in sorted(plain, key=lambda e: e.dst):
                sig2 = _extend_sigma(g.state(e.dst), out, sigma, oracle)
                if sig2 is not None and weakly_represents(g.state(e.dst), out, sig2, oracle):
                    node, c, sigma = e.dst, out, sig2
                    matches.append((steps, node))
                    break
            else:
                if err_edges:
                    # the graph gave up on safety here; ERR absorbs the run
                    node = err_edges[0].dst
                    matches.append((steps, node))
                    return report(True, "absorbed_err")
                return report(False, "mismatch", f"no evaluation successor of node {node} matches")
            continue

        # leaf: a single-frame return state ends the matched run
        if s.size == 1 and isinstance(program.instruction_at(s.pos), Ret):
            if c.size == s.size:
                out = interp.step(c)
                steps += 1
                if isinstance(out, Halted):
                    return report(True, "halted", value=out.value)
                return report(False, "mismatch", "return leaf but the run did not halt")
            return report(True, "leaf")
        return report(False, "mismatch", f"stuck at node {node} with no usable edges")
