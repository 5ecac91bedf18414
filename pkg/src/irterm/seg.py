"""Symbolic execution graph construction.

States are nodes; edges record how one state arose from another: plain
evaluation, a refinement case split, a generalization (with the instantiation
mapping the general state's variables to the specific one's), the call
abstraction that isolates a callee's frame, or an intersection that summarizes
a finished call.

The builder drives a worklist: call states get exactly one call abstraction
whose generalization targets an entry state of the callee (an existing one
when the structural candidate instantiation validates, a freshly promoted one
otherwise); return states are intersected with every compatible call state;
repeated positions on a path are closed by generalization or by merging into
a common weaker state.  All proof obligations fail closed on an Unknown
oracle answer.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from . import ir
from .astate import (
    ERR,
    AbstractState,
    Allocation,
    PointsTo,
    StackFrame,
    VarIdentity,
    VarSupply,
    al_star,
    is_call_state,
    is_entry_shaped,
    is_return_state,
    mk_lv,
    state_formula,
    sym_vars,
)
from .ir import size_of
from .logic import (
    DEFAULT_ORACLE,
    Cmp,
    Entailment,
    Instantiation,
    Oracle,
    SatStatus,
    SymVar,
    conj,
    eq,
    le,
    sorted_formulas,
    subst_formula,
)
from .symexec import Called, ErrStep, Evaluated, NeedsRefinement, Returned, refine, step

EVAL = "eval"
REFINE = "refine"
GEN = "gen"
CALLABS = "callabs"
INTERSECT = "intersect"

_VALID = Entailment.VALID


@dataclass
class HeuristicsConfig:
    merge_threshold: int = 2
    aggressive_merge: Optional[bool] = None  # None: auto over the branch threshold
    aggressive_branch_threshold: int = 32
    unique_entry: Optional[bool] = None  # None: enabled past the instruction threshold
    unique_entry_threshold: int = 500
    prune_mode: str = "off"  # off | callabs | all
    node_cap: int = 10_000


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str
    mu: Optional[Instantiation] = None
    ret_id: Optional[int] = None
    delta: Optional[Instantiation] = None


@dataclass(frozen=True)
class GenCheck:
    ok: bool
    violated: Optional[str] = None


class Seg:
    """Graph of abstract states with typed edges."""

    def __init__(self, program: ir.Program):
        self.program = program
        self.nodes: Dict[int, object] = {}
        self._out: Dict[int, List[Edge]] = {}
        self._in: Dict[int, List[Edge]] = {}
        self.entry_index: Dict[str, List[int]] = {}
        self.entry_of: Dict[int, int] = {}
        self.unsat_flags: Dict[int, bool] = {}
        self.err_id: Optional[int] = None
        self.err_reasons: List[str] = []
        self.unprocessed: List[int] = []
        self.pos_counts: Counter = Counter()
        self._ids = itertools.count(1)

    def add_node(self, state, entry_of: Optional[int] = None) -> int:
        nid = next(self._ids)
        self.nodes[nid] = state
        self._out[nid] = []
        self._in[nid] = []
        if entry_of is not None:
            self.entry_of[nid] = entry_of
        if not state.is_err:
            self.pos_counts[state.pos] += 1
        return nid

    def ensure_err(self) -> int:
        if self.err_id is None or self.err_id not in self.nodes:
            self.err_id = self.add_node(ERR)
        return self.err_id

    def add_edge(self, src, dst, kind, mu=None, ret_id=None, delta=None) -> Edge:
        e = Edge(src, dst, kind, mu, ret_id, delta)
        self._out[src].append(e)
        self._in[dst].append(e)
        return e

    def out_edges(self, nid, kind: Optional[str] = None) -> List[Edge]:
        es = self._out.get(nid, [])
        return [e for e in es if kind is None or e.kind == kind]

    def in_edges(self, nid, kind: Optional[str] = None) -> List[Edge]:
        es = self._in.get(nid, [])
        return [e for e in es if kind is None or e.kind == kind]

    def has_in(self, nid, kinds) -> bool:
        return any(e.kind in kinds for e in self._in.get(nid, ()))

    def has_out(self, nid, kinds) -> bool:
        return any(e.kind in kinds for e in self._out.get(nid, ()))

    def edges(self) -> List[Edge]:
        return [e for es in self._out.values() for e in es]

    def state(self, nid) -> AbstractState:
        return self.nodes[nid]

    def function_of(self, nid) -> Optional[str]:
        """Function a node belongs to: the outermost frame's, so call states
        and intersections count toward their caller."""
        s = self.nodes[nid]
        if s.is_err:
            return None
        return self.program.func_of_block(s.frames[-1].pos[0])

    def ids_at(self, pos) -> List[int]:
        return sorted(
            nid for nid, s in self.nodes.items() if not s.is_err and s.pos == pos
        )

    def exec_reachable(self, src: int) -> Set[int]:
        """Nodes reachable from src along execution paths (no call abstraction edges)."""
        seen = {src}
        work = deque([src])
        while work:
            n = work.popleft()
            for e in self._out.get(n, ()):
                if e.kind == CALLABS or e.dst in seen:
                    continue
                seen.add(e.dst)
                work.append(e.dst)
        return seen

    def exec_path(self, src: int, dst: int) -> bool:
        return dst in self.exec_reachable(src)

    def reachable(self, roots: Iterable[int]) -> Set[int]:
        seen = set(r for r in roots if r in self.nodes)
        work = deque(seen)
        while work:
            n = work.popleft()
            for e in self._out.get(n, ()):
                if e.dst not in seen and e.dst in self.nodes:
                    seen.add(e.dst)
                    work.append(e.dst)
        return seen

    def remove_nodes(self, dead: Set[int]) -> None:
        for nid in dead:
            self.nodes.pop(nid, None)
            self._out.pop(nid, None)
            self._in.pop(nid, None)
            self.entry_of.pop(nid, None)
            self.unsat_flags.pop(nid, None)
        for adj in (self._out, self._in):
            for nid, es in adj.items():
                adj[nid] = [e for e in es if e.src not in dead and e.dst not in dead]
        for fn, ids in self.entry_index.items():
            self.entry_index[fn] = [i for i in ids if i not in dead]
        if self.err_id in dead:
            self.err_id = None

    def remove_edges(self, drop: List[Edge]) -> None:
        dropset = set((e.src, e.dst, e.kind, id(e)) for e in drop)
        for e in drop:
            self._out[e.src] = [x for x in self._out.get(e.src, []) if x is not e]
            self._in[e.dst] = [x for x in self._in.get(e.dst, []) if x is not e]
        del dropset


# ---------------------------------------------------------------------------
# Abstraction operations


def context_abstraction(s: AbstractState, k: int) -> AbstractState:
    """Keep the topmost k frames; the lowest kept frame absorbs the dropped
    frames' stack allocations."""
    if not (1 <= k <= s.size):
        raise ValueError(f"context abstraction size {k} out of range for |s|={s.size}")
    if k == s.size:
        return s
    kept = list(s.frames[:k])
    merged = frozenset().union(*(fr.allocs for fr in s.frames[k - 1 :]))
    last = kept[-1]
    kept[-1] = StackFrame(last.pos, last.lv, merged, last.return_target)
    return s.replace(frames=tuple(kept))


def call_abstraction(program: ir.Program, s: AbstractState) -> AbstractState:
    if not is_call_state(program, s):
        raise ValueError("call abstraction is only defined for call states")
    return context_abstraction(s, 1).replace(vi=frozenset())


def _frame_al(s: AbstractState, i: int) -> FrozenSet[Allocation]:
    """Allocation list by frame index; index 0 is the heap."""
    if i == 0:
        return s.al
    return s.frames[i - 1].allocs


def prune_state(s: AbstractState, oracle: Oracle) -> AbstractState:
    """Drop KB/AL/PT/VI entries that only involve variables unreachable from
    the program variables.

    Reachability: LV ranges seed; KB formulas and allocation entries connect
    their variables; a points-to value is reached through its address when the
    address provably sits inside an allocation with a reached bound.
    """
    phi = state_formula(s, oracle)
    reach: Set[SymVar] = set()
    for fr in s.frames:
        reach.update(v for _, v in fr.lv)
    kb_vars = [(f, _formula_syms(f)) for f in sorted_formulas(s.kb)]
    allocs = sorted(al_star(s), key=_al_key)
    pts = sorted(s.pt, key=_pt_key)
    changed = True
    while changed:
        changed = False
        for _, vs in kb_vars:
            if vs & reach and not vs <= reach:
                reach |= vs
                changed = True
        for a in allocs:
            bounds = {a.lower, a.upper}
            if bounds & reach and not bounds <= reach:
                reach |= bounds
                changed = True
        for p in pts:
            if p.addr in reach and p.value not in reach:
                end = p.addr if size_of(p.ty) == 1 else p.addr + (size_of(p.ty) - 1)
                for a in allocs:
                    if a.lower in reach and (
                        oracle.entails(phi, conj(le(a.lower, p.addr), le(end, a.upper)))
                        is _VALID
                    ):
                        reach.add(p.value)
                        changed = True
                        break
    kb = frozenset(f for f, vs in kb_vars if vs <= reach)
    al = frozenset(a for a in s.al if a.lower in reach and a.upper in reach)
    frames = tuple(
        StackFrame(
            fr.pos,
            fr.lv,
            frozenset(a for a in fr.allocs if a.lower in reach and a.upper in reach),
            fr.return_target,
        )
        for fr in s.frames
    )
    pt = frozenset(p for p in s.pt if p.addr in reach and p.value in reach)
    vi = frozenset(e for e in s.vi if e.current_var in reach)
    return AbstractState(frames, kb, al, pt, vi)


def _formula_syms(f) -> Set[SymVar]:
    from .logic import formula_vars

    return set(formula_vars(f))


def _al_key(a: Allocation):
    return (a.lower.id, a.upper.id)


def _pt_key(p: PointsTo):
    return (p.addr.id, repr(p.ty), p.value.id)


# ---------------------------------------------------------------------------
# Variable correspondence


def _strip_zero(t):
    if isinstance(t, SymVar):
        return t
    from .logic import BinTerm

    if isinstance(t, BinTerm) and t.op in ("+", "-") and t.rhs == 0:
        return _strip_zero(t.lhs)
    if isinstance(t, BinTerm) and t.op == "+" and t.lhs == 0:
        return _strip_zero(t.rhs)
    return t


def _var_eq_pairs(phis) -> List[Tuple[SymVar, SymVar]]:
    out = []
    for f in phis:
        if isinstance(f, Cmp) and f.op == "=":
            l, r = _strip_zero(f.lhs), _strip_zero(f.rhs)
            if isinstance(l, SymVar) and isinstance(r, SymVar) and l != r:
                out.append((l, r))
    return out


def _eq_classes(phis) -> Dict[SymVar, FrozenSet[SymVar]]:
    parent: Dict[SymVar, SymVar] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in _var_eq_pairs(phis):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: Dict[SymVar, Set[SymVar]] = {}
    for v in parent:
        groups.setdefault(find(v), set()).add(v)
    return {v: frozenset(g) for g in groups.values() for v in g}


def candidate_mu(
    s: AbstractState, sbar: AbstractState, oracle: Oracle
) -> Optional[Instantiation]:
    """Structural instantiation candidate mapping sbar's variables to s's.

    Seeded by the LV correspondence, closed under sbar's provable variable
    equalities, and propagated through matching allocation bounds and
    points-to values.  None when some variable of sbar stays unmapped.
    """
    if s.is_err or sbar.is_err or s.size != sbar.size:
        return None
    mu: Dict[SymVar, SymVar] = {}
    for fr, frbar in zip(s.frames, sbar.frames):
        if fr.pos != frbar.pos or fr.lv_dom() != frbar.lv_dom():
            return None
        for x, vbar in frbar.lv:
            v = fr.lv_get(x)
            if mu.setdefault(vbar, v) != v:
                return None
    phi = state_formula(s, oracle)
    phibar = state_formula(sbar, oracle)
    classes = _eq_classes(phibar)
    svars = sorted(sym_vars(sbar))
    changed = True
    while changed:
        changed = False
        for v in svars:
            if v in mu:
                continue
            for w in sorted(classes.get(v, ())):
                if w in mu:
                    mu[v] = mu[w]
                    changed = True
                    break
        for i in range(sbar.size + 1):
            albar = sorted(_frame_al(sbar, i), key=_al_key)
            al = sorted(_frame_al(s, i), key=_al_key)
            for abar in albar:
                if abar.lower in mu and abar.upper not in mu:
                    for a in al:
                        if oracle.entails(phi, eq(a.lower, mu[abar.lower])) is _VALID:
                            mu[abar.upper] = a.upper
                            changed = True
                            break
                elif abar.upper in mu and abar.lower not in mu:
                    for a in al:
                        if oracle.entails(phi, eq(a.upper, mu[abar.upper])) is _VALID:
                            mu[abar.lower] = a.lower
                            changed = True
                            break
        pts = sorted(s.pt, key=_pt_key)
        for pbar in sorted(sbar.pt, key=_pt_key):
            if pbar.addr in mu and pbar.value not in mu:
                for p in pts:
                    if p.ty == pbar.ty and (
                        oracle.entails(phi, eq(p.addr, mu[pbar.addr])) is _VALID
                    ):
                        mu[pbar.value] = p.value
                        changed = True
                        break
    if any(v not in mu for v in sym_vars(sbar)):
        return None
    return Instantiation.of(mu)


def check_generalization(
    s: AbstractState,
    sbar: AbstractState,
    mu: Instantiation,
    oracle: Oracle,
    incoming_kinds: FrozenSet[str] = frozenset(),
    sbar_is_entry: bool = False,
) -> GenCheck:
    """Verify that sbar generalizes s under mu.  Any Unknown answer counts
    as a violation."""
    if REFINE in incoming_kinds or GEN in incoming_kinds:
        return GenCheck(False, "a")
    if s.is_err or sbar.is_err or s.size != sbar.size:
        return GenCheck(False, "b")
    for fr, frbar in zip(s.frames, sbar.frames):
        if fr.pos != frbar.pos or fr.lv_dom() != frbar.lv_dom():
            return GenCheck(False, "b")
        for x, vbar in frbar.lv:
            if fr.lv_get(x) != mu.get(vbar):
                return GenCheck(False, "b")
    phi = state_formula(s, oracle)
    for f in sorted_formulas(sbar.kb):
        if oracle.entails(phi, mu.apply(f)) is not _VALID:
            return GenCheck(False, "c")
    for i in range(s.size + 1):
        al = sorted(_frame_al(s, i), key=_al_key)
        for abar in sorted(_frame_al(sbar, i), key=_al_key):
            lo, hi = mu.get(abar.lower), mu.get(abar.upper)
            if lo is None or hi is None:
                return GenCheck(False, "d")
            if not any(
                oracle.entails(phi, conj(eq(a.lower, lo), eq(a.upper, hi))) is _VALID
                for a in al
            ):
                return GenCheck(False, "d")
    pts = sorted(s.pt, key=_pt_key)
    for pbar in sorted(sbar.pt, key=_pt_key):
        ad, val = mu.get(pbar.addr), mu.get(pbar.value)
        if ad is None or val is None:
            return GenCheck(False, "e")
        if not any(
            p.ty == pbar.ty
            and oracle.entails(phi, conj(eq(p.addr, ad), eq(p.value, val))) is _VALID
            for p in pts
        ):
            return GenCheck(False, "e")
    if not sbar_is_entry:
        for e in sorted(sbar.vi, key=lambda e: (e.entry_var.id, e.current_var.id)):
            w = mu.get(e.current_var)
            if not isinstance(w, SymVar) or VarIdentity(e.entry_var, w) not in s.vi:
                return GenCheck(False, "f")
    return GenCheck(True)


def removed_al(
    s_ca: AbstractState,
    s_e: AbstractState,
    mu: Instantiation,
    a: Allocation,
    oracle: Oracle,
) -> bool:
    """True when the allocation has no counterpart in the entry state under mu.

    Such an allocation never reached the summarized call, so the call cannot
    have freed it and the caller may keep it across the intersection.
    """
    phi = state_formula(s_ca, oracle)
    for w in sorted(al_star(s_e), key=_al_key):
        lo, hi = mu.get(w.lower), mu.get(w.upper)
        if lo is None or hi is None:
            continue
        if oracle.entails(phi, conj(eq(a.lower, lo), eq(a.upper, hi))) is _VALID:
            return False
    return True


def intersect(
    s_c: AbstractState,
    s_r: AbstractState,
    s_ca: AbstractState,
    s_e: AbstractState,
    mu: Instantiation,
    supply: VarSupply,
    oracle: Oracle,
) -> Tuple[AbstractState, Instantiation]:
    """Combine a call state with a return state of the summarized call.

    The return state's variables are renamed apart by a fresh delta; its
    single frame (stripped of stack allocations) tops the call state's lower
    frames.  Memory from the call state transfers only when its allocation
    was removed in the generalization to the entry state.
    """
    if s_r.size != 1:
        raise ValueError("return states have a single frame")
    if s_c.size < 2:
        raise ValueError("call states have more than one frame")
    dmap = {v: supply.fresh(v.hint or "w") for v in sorted(sym_vars(s_r))}
    delta = Instantiation.of(dmap)
    rfr = s_r.frames[0]
    top = StackFrame(rfr.pos, mk_lv({x: dmap[v] for x, v in rfr.lv}), frozenset(), None)
    frames = (top,) + s_c.frames[1:]
    kb = {delta.apply(f) for f in s_r.kb} | set(s_c.kb)
    for e in sorted(s_r.vi, key=lambda e: (e.entry_var.id, e.current_var.id)):
        v_img = mu.get(e.entry_var)
        if isinstance(v_img, SymVar) and e.current_var in dmap:
            kb.add(eq(v_img, dmap[e.current_var]))
    phi_c = state_formula(s_c, oracle)
    kept = {a for a in s_c.al if removed_al(s_ca, s_e, mu, a, oracle)}
    al = {Allocation(dmap[a.lower], dmap[a.upper]) for a in s_r.al} | kept
    pt = {PointsTo(dmap[p.addr], p.ty, dmap[p.value]) for p in s_r.pt}
    for p in sorted(s_c.pt, key=_pt_key):
        end = p.addr if size_of(p.ty) == 1 else p.addr + (size_of(p.ty) - 1)
        for a in sorted(kept, key=_al_key):
            if oracle.entails(phi_c, conj(le(a.lower, p.addr), le(end, a.upper))) is _VALID:
                pt.add(p)
                break
    draft = AbstractState(frames, frozenset(kb), frozenset(al), frozenset(pt), s_c.vi)
    from .symexec import vi_update

    return draft.replace(vi=vi_update(s_c, draft, oracle)), delta


# ---------------------------------------------------------------------------
# Merging


_EXTEND_CACHE: Dict[tuple, FrozenSet] = {}


def extend_formula(s: AbstractState, oracle: Oracle) -> FrozenSet:
    """State formula closed one round under substituting provably equal
    variables into comparison atoms.

    Small states get the full entailment-based closure; past a size budget
    only equalities spelled out as atoms are propagated, which keeps merge
    costs linear on the wide flat states of branch-heavy programs.
    """
    key = (id(oracle), s.frames, s.kb, s.al, s.pt)
    hit = _EXTEND_CACHE.get(key)
    if hit is not None:
        return hit
    base = state_formula(s, oracle)
    out = set(base)
    svars = sorted(sym_vars(s))
    atoms = [f for f in sorted_formulas(base) if isinstance(f, Cmp)]
    if len(atoms) * len(svars) <= 800:
        for f in atoms:
            for v in svars:
                if v != f.lhs and oracle.entails(base, eq(v, f.lhs)) is _VALID:
                    out.add(Cmp(f.op, v, f.rhs))
                if v != f.rhs and oracle.entails(base, eq(v, f.rhs)) is _VALID:
                    out.add(Cmp(f.op, f.lhs, v))
    else:
        classes = _eq_classes(base)
        for f in atoms:
            for v in sorted(classes.get(f.lhs, ())):
                if v != f.lhs:
                    out.add(Cmp(f.op, v, f.rhs))
            for v in sorted(classes.get(f.rhs, ())):
                if v != f.rhs:
                    out.add(Cmp(f.op, f.lhs, v))
    res = frozenset(out)
    if len(_EXTEND_CACHE) > 4096:
        _EXTEND_CACHE.clear()
    _EXTEND_CACHE[key] = res
    return res


def _lift(f, inv: Dict[SymVar, SymVar]):
    vs = _formula_syms(f)
    if not vs <= set(inv):
        return None
    g = subst_formula(f, inv)
    if isinstance(g, Cmp) and g.op in ("=", "<=", ">="):
        if _strip_zero(g.lhs) == _strip_zero(g.rhs):
            return None  # reflexively true, no information
    return g


def merge_states(
    s1: AbstractState,
    s2: AbstractState,
    supply: VarSupply,
    oracle: Oracle,
    intersect_domains: bool = False,
    target_is_entry: bool = False,
) -> Optional[Tuple[AbstractState, Instantiation, Instantiation]]:
    """Generalize two same-shaped states into a fresh common cover.

    The cover keeps exactly the knowledge whose renamings hold on both
    sides (after extending each side's formula with provably equal
    variants), memory entries matched on both sides, and variable
    identities shared by both.  Returns None when the result fails the
    generalization conditions for either input.
    """
    if s1.is_err or s2.is_err or s1.size != s2.size:
        return None
    for f1, f2 in zip(s1.frames, s2.frames):
        if f1.pos != f2.pos or f1.return_target != f2.return_target:
            return None
        if not intersect_domains and f1.lv_dom() != f2.lv_dom():
            return None
    mu1: Dict[SymVar, SymVar] = {}
    mu2: Dict[SymVar, SymVar] = {}
    phi1 = state_formula(s1, oracle)
    phi2 = state_formula(s2, oracle)

    def find_gvar(v1: SymVar, v2: SymVar) -> Optional[SymVar]:
        for m in sorted(mu1):
            if mu1[m] == v1 and mu2[m] == v2:
                return m
        for m in sorted(mu1):
            if (
                oracle.entails(phi1, eq(mu1[m], v1)) is _VALID
                and oracle.entails(phi2, eq(mu2[m], v2)) is _VALID
            ):
                return m
        return None

    frame_specs = []
    for f1, f2 in zip(s1.frames, s2.frames):
        dom = sorted(f1.lv_dom() & f2.lv_dom())
        lv = {}
        for x in dom:
            m = supply.fresh(f"m_{x}")
            lv[x] = m
            mu1[m] = f1.lv_get(x)
            mu2[m] = f2.lv_get(x)
        frame_specs.append((f1.pos, lv, f1.return_target))

    al_g: Dict[int, Set[Allocation]] = {i: set() for i in range(s1.size + 1)}
    pt_g: Set[PointsTo] = set()
    used1: Set = set()
    used2: Set = set()
    changed = True
    while changed:
        changed = False
        for i in range(s1.size + 1):
            for a1 in sorted(_frame_al(s1, i), key=_al_key):
                if (i, a1) in used1:
                    continue
                for a2 in sorted(_frame_al(s2, i), key=_al_key):
                    if (i, a2) in used2:
                        continue
                    m_lo = find_gvar(a1.lower, a2.lower)
                    m_hi = find_gvar(a1.upper, a2.upper)
                    if m_lo is None and m_hi is None:
                        continue
                    if m_lo is None:
                        m_lo = supply.fresh("m_lo")
                        mu1[m_lo] = a1.lower
                        mu2[m_lo] = a2.lower
                    if m_hi is None:
                        m_hi = supply.fresh("m_hi")
                        mu1[m_hi] = a1.upper
                        mu2[m_hi] = a2.upper
                    al_g[i].add(Allocation(m_lo, m_hi))
                    used1.add((i, a1))
                    used2.add((i, a2))
                    changed = True
                    break
        for p1 in sorted(s1.pt, key=_pt_key):
            if p1 in used1:
                continue
            for p2 in sorted(s2.pt, key=_pt_key):
                if p2 in used2 or p1.ty != p2.ty:
                    continue
                m_a = find_gvar(p1.addr, p2.addr)
                if m_a is None:
                    continue
                m_v = find_gvar(p1.value, p2.value)
                if m_v is None:
                    m_v = supply.fresh("m_val")
                    mu1[m_v] = p1.value
                    mu2[m_v] = p2.value
                pt_g.add(PointsTo(m_a, p1.ty, m_v))
                used1.add(p1)
                used2.add(p2)
                changed = True
                break

    inv1 = {}
    inv2 = {}
    for m in sorted(mu1):
        inv1.setdefault(mu1[m], m)
        inv2.setdefault(mu2[m], m)
    i1 = Instantiation.of(mu1)
    i2 = Instantiation.of(mu2)
    kb: Set = set()
    for f in sorted_formulas(extend_formula(s1, oracle)):
        fg = _lift(f, inv1)
        if fg is not None and oracle.entails(phi2, i2.apply(fg)) is _VALID:
            kb.add(fg)
    for f in sorted_formulas(extend_formula(s2, oracle)):
        fg = _lift(f, inv2)
        if fg is not None and oracle.entails(phi1, i1.apply(fg)) is _VALID:
            kb.add(fg)

    vi: Set[VarIdentity] = set()
    vi2 = s2.vi
    for m in sorted(mu1):
        for e in s1.vi:
            if e.current_var == mu1[m] and VarIdentity(e.entry_var, mu2[m]) in vi2:
                vi.add(VarIdentity(e.entry_var, m))

    frames = tuple(
        StackFrame(pos, mk_lv(lv), frozenset(al_g[i + 1]), rt)
        for i, (pos, lv, rt) in enumerate(frame_specs)
    )
    g = AbstractState(frames, frozenset(kb), frozenset(al_g[0]), frozenset(pt_g), frozenset(vi))
    if not check_generalization(s1, g, i1, oracle, sbar_is_entry=target_is_entry).ok:
        return None
    if not check_generalization(s2, g, i2, oracle, sbar_is_entry=target_is_entry).ok:
        return None
    return g, i1, i2


# ---------------------------------------------------------------------------
# Entry promotion


def promote_entry(
    h: AbstractState, supply: VarSupply, oracle: Oracle
) -> Tuple[AbstractState, Instantiation]:
    """Turn a call abstraction into a fresh entry state.

    Only variables anchored from the LV ranges (through provable equalities,
    allocation bounds, and points-to values) survive, and only the structural
    glue between them is kept as knowledge: variable equalities, nothing else.
    Value constraints (signs, arithmetic) are deliberately dropped so the one
    entry covers every later call of the function and conditions inside it
    stay undecided, forcing refinements that record their facts as atoms.
    """
    phis = state_formula(h, oracle)
    classes = _eq_classes(phis)
    anchored: Set[SymVar] = set()
    for fr in h.frames:
        anchored.update(v for _, v in fr.lv)
    allocs = sorted(al_star(h), key=_al_key)
    pts = sorted(h.pt, key=_pt_key)
    changed = True
    while changed:
        changed = False
        for v in list(anchored):
            for w in classes.get(v, ()):
                if w not in anchored:
                    anchored.add(w)
                    changed = True
        for a in allocs:
            bounds = {a.lower, a.upper}
            if bounds & anchored and not bounds <= anchored:
                anchored |= bounds
                changed = True
        for p in pts:
            if p.addr in anchored and p.value not in anchored:
                anchored.add(p.value)
                changed = True
    ren = {v: supply.fresh(v.hint) for v in sorted(anchored)}
    frames = tuple(
        StackFrame(
            fr.pos,
            mk_lv({x: ren[v] for x, v in fr.lv}),
            frozenset(
                Allocation(ren[a.lower], ren[a.upper])
                for a in fr.allocs
                if a.lower in anchored and a.upper in anchored
            ),
            None,
        )
        for fr in h.frames
    )
    glue = {
        (a, b)
        for a, b in _var_eq_pairs(sorted_formulas(phis))
        if a in anchored and b in anchored
    }
    kb = frozenset(eq(ren[a], ren[b]) for a, b in sorted(glue))
    al = frozenset(
        Allocation(ren[a.lower], ren[a.upper])
        for a in h.al
        if a.lower in anchored and a.upper in anchored
    )
    pt = frozenset(
        PointsTo(ren[p.addr], p.ty, ren[p.value])
        for p in h.pt
        if p.addr in anchored and p.value in anchored
    )
    e = AbstractState(frames, kb, al, pt, frozenset())
    e = e.replace(vi=frozenset(VarIdentity(v, v) for v in sym_vars(e)))
    mu = Instantiation.of({ren[v]: v for v in sorted(anchored)})
    return e, mu


# ---------------------------------------------------------------------------
# Builder


class SegBuilder:
    def __init__(
        self,
        program: ir.Program,
        cfg: Optional[HeuristicsConfig] = None,
        supply: Optional[VarSupply] = None,
        oracle: Optional[Oracle] = None,
    ):
        self.program = program
        self.cfg = cfg or HeuristicsConfig()
        self.supply = supply or VarSupply()
        self.oracle = oracle or DEFAULT_ORACLE
        self.seg = Seg(program)
        self.worklist: deque = deque()
        self.roots: List[int] = []
        self.returns: Dict[str, List[int]] = {}
        self.call_binding: Dict[int, Tuple[int, Instantiation, int]] = {}
        self.intersections: Set[Tuple[int, int]] = set()
        self.capped = False
        self._branch_counts = {
            fn: sum(
                1
                for b in f.blocks
                for i in b.instrs
                if isinstance(i, ir.Br) and i.cond is not None
            )
            for fn, f in program.functions.items()
        }

    # -- configuration helpers

    def _aggressive(self, func: str) -> bool:
        if self.cfg.aggressive_merge is not None:
            return self.cfg.aggressive_merge
        return self._branch_counts.get(func, 0) > self.cfg.aggressive_branch_threshold

    def _unique_entry(self) -> bool:
        if self.cfg.unique_entry is not None:
            return self.cfg.unique_entry
        return self.program.instruction_count() > self.cfg.unique_entry_threshold

    # -- roots

    def add_root(self, func_name: str) -> int:
        f = self.program.function(func_name)
        lv = {}
        for pname, _ in f.params:
            lv[pname] = self.supply.fresh(f"v_{pname}")
        s = AbstractState(
            frames=(StackFrame(self.program.initial_position(func_name), mk_lv(lv)),),
            kb=frozenset(),
            al=frozenset(),
            pt=frozenset(),
            vi=frozenset(),
        )
        s = s.replace(vi=frozenset(VarIdentity(v, v) for v in sym_vars(s)))
        nid = self.seg.add_node(s)
        self.seg.entry_of[nid] = nid
        self.seg.entry_index.setdefault(func_name, []).append(nid)
        self.roots.append(nid)
        self.worklist.append(nid)
        return nid

    def run(self) -> Seg:
        processed: Set[int] = set()
        while self.worklist:
            if len(self.seg.nodes) > self.cfg.node_cap:
                self.capped = True
                break
            nid = self.worklist.popleft()
            if nid not in self.seg.nodes or nid in processed:
                continue
            processed.add(nid)
            self._process(nid)
        self.seg.unprocessed = [
            n for n in self.worklist if n in self.seg.nodes and n not in processed
        ]
        return self.seg

    # -- single node

    def _process(self, nid: int) -> None:
        s = self.seg.nodes[nid]
        if s.is_err:
            return
        if self.seg.has_out(nid, {GEN}):
            # became a merge input before its turn; the cover explores instead
            return
        sat = self.oracle.satisfiable(state_formula(s, self.oracle))
        if sat.status is SatStatus.UNSAT:
            self.seg.unsat_flags[nid] = True
            return
        if is_return_state(self.program, s):
            self._handle_return(nid)
        elif is_call_state(self.program, s):
            self._handle_call(nid)
        else:
            if self._try_position_closure(nid):
                return
            self._evaluate(nid)

    # -- evaluation

    def _evaluate(self, nid: int) -> None:
        s = self.seg.nodes[nid]
        outcome = step(self.program, s, self.supply, self.oracle)
        if isinstance(outcome, (Evaluated, Called, Returned)):
            t = outcome.state
            if self.cfg.prune_mode == "all":
                t = prune_state(t, self.oracle)
            tid = self._new_node(t, nid)
            self.seg.add_edge(nid, tid, EVAL)
            self.worklist.append(tid)
        elif isinstance(outcome, NeedsRefinement):
            for child in refine(s, outcome.condition, self.oracle):
                cid = self._new_node(child, nid)
                self.seg.add_edge(nid, cid, REFINE)
                self.worklist.append(cid)
        elif isinstance(outcome, ErrStep):
            eid = self.seg.ensure_err()
            self.seg.add_edge(nid, eid, EVAL)
            self.seg.err_reasons.append(outcome.reason)
        else:
            raise TypeError(f"unexpected step outcome {outcome!r}")

    def _new_node(self, state: AbstractState, parent: int) -> int:
        return self.seg.add_node(state, entry_of=self.seg.entry_of.get(parent))

    # -- return states

    def _handle_return(self, nid: int) -> None:
        s = self.seg.nodes[nid]
        func = self.seg.function_of(nid)
        eligible_src = not self.seg.has_in(nid, {REFINE, GEN})
        if eligible_src and self._gen_to_existing(nid, s):
            return
        if eligible_src and self._merge_return(nid, s, func):
            return
        self.returns.setdefault(func, []).append(nid)
        for cid in self._call_states_of(func):
            self._maybe_intersect(cid, nid)

    def _candidate_targets(self, nid: int, s: AbstractState, require_ancestor: bool):
        ids = [
            t
            for t in self.seg.ids_at(s.pos)
            if t != nid
            and self.seg.nodes[t].size == s.size
            and self._share_entry(t, nid)
        ]
        if require_ancestor:
            ids = [t for t in ids if self.seg.exec_path(t, nid)]
        # try states that already summarize others first
        ids.sort(key=lambda t: (not self.seg.has_in(t, {GEN}), t))
        return ids

    def _share_entry(self, a: int, b: int) -> bool:
        ea, eb = self.seg.entry_of.get(a), self.seg.entry_of.get(b)
        return ea is not None and ea == eb

    def _gen_to_existing(self, nid: int, s: AbstractState) -> bool:
        for tid in self._candidate_targets(nid, s, require_ancestor=False):
            tstate = self.seg.nodes[tid]
            mu = candidate_mu(s, tstate, self.oracle)
            if mu is None:
                continue
            res = check_generalization(
                s,
                tstate,
                mu,
                self.oracle,
                incoming_kinds=frozenset(
                    e.kind for e in self.seg.in_edges(nid)
                ),
                sbar_is_entry=is_entry_shaped(self.program, tstate),
            )
            if res.ok:
                self.seg.add_edge(nid, tid, GEN, mu=mu)
                return True
        return False

    def _merge_return(self, nid: int, s: AbstractState, func: str) -> bool:
        if self.seg.pos_counts[s.pos] < self.cfg.merge_threshold:
            return False
        aggressive = self._aggressive(func)
        partners = []
        for rid in self.returns.get(func, []):
            if rid == nid or rid not in self.seg.nodes:
                continue
            r = self.seg.nodes[rid]
            if r.pos != s.pos:
                continue
            if self.seg.has_in(rid, {REFINE, GEN}) or self.seg.has_out(rid, {GEN}):
                continue
            if not aggressive and not self._share_entry(rid, nid):
                continue
            partners.append(rid)
        for rid in sorted(partners):
            res = merge_states(
                self.seg.nodes[rid], s, self.supply, self.oracle,
                intersect_domains=aggressive,
            )
            if res is None:
                continue
            g, mu1, mu2 = res
            gid = self.seg.add_node(g, entry_of=self.seg.entry_of.get(rid))
            self.seg.add_edge(rid, gid, GEN, mu=mu1)
            self.seg.add_edge(nid, gid, GEN, mu=mu2)
            self._drop_stale_intersections({rid, nid})
            self.returns[func] = [x for x in self.returns[func] if x != rid]
            self._gc()
            self.worklist.append(gid)
            return True
        return False

    def _drop_stale_intersections(self, ret_ids: Set[int]) -> None:
        stale = [
            e
            for e in self.seg.edges()
            if e.kind == INTERSECT and e.ret_id in ret_ids
        ]
        self.seg.remove_edges(stale)
        self.intersections = {
            (c, r) for (c, r) in self.intersections if r not in ret_ids
        }

    # -- call states

    def _call_states_of(self, func: str) -> List[int]:
        out = []
        for cid, (eid, _, _) in self.call_binding.items():
            if cid not in self.seg.nodes:
                continue
            s = self.seg.nodes[cid]
            if not s.is_err and self.program.func_of_block(s.pos[0]) == func:
                out.append(cid)
        return sorted(out)

    def _handle_call(self, nid: int) -> None:
        if nid in self.call_binding:
            return
        s = self.seg.nodes[nid]
        callee = self.program.func_of_block(s.pos[0])
        h = call_abstraction(self.program, s)
        if self.cfg.prune_mode in ("callabs", "all"):
            h = prune_state(h, self.oracle)
        hid = self.seg.add_node(h, entry_of=self.seg.entry_of.get(nid))
        self.seg.add_edge(nid, hid, CALLABS)
        for eid in list(self.seg.entry_index.get(callee, [])):
            e_state = self.seg.nodes[eid]
            mu = candidate_mu(h, e_state, self.oracle)
            if mu is None:
                continue
            res = check_generalization(
                h, e_state, mu, self.oracle,
                incoming_kinds=frozenset(e.kind for e in self.seg.in_edges(hid)),
                sbar_is_entry=True,
            )
            if not res.ok:
                continue
            self.seg.add_edge(hid, eid, GEN, mu=mu)
            self.call_binding[nid] = (eid, mu, hid)
            reach = self.seg.exec_reachable(eid)
            for rid in list(self.returns.get(callee, [])):
                if rid in reach:
                    self._maybe_intersect(nid, rid)
            return
        if self._unique_entry() and self.seg.entry_index.get(callee):
            if self._widen_unique_entry(nid, hid, h, callee):
                return
        e_new, mu = promote_entry(h, self.supply, self.oracle)
        eid = self.seg.add_node(e_new)
        self.seg.entry_of[eid] = eid
        self.seg.entry_index.setdefault(callee, []).append(eid)
        self.seg.add_edge(hid, eid, GEN, mu=mu)
        self.call_binding[nid] = (eid, mu, hid)
        self.worklist.append(eid)

    def _compose_var_map(self, outer: Instantiation, inner: Instantiation, dom) -> Optional[Instantiation]:
        out = {}
        for v in sorted(dom):
            img = inner.get(v)
            img = outer.get(img) if isinstance(img, SymVar) else None
            if img is None:
                return None
            out[v] = img
        return Instantiation.of(out)

    def _widen_unique_entry(self, nid: int, hid: int, h: AbstractState, callee: str) -> bool:
        old_eid = self.seg.entry_index[callee][0]
        old_e = self.seg.nodes[old_eid]
        e_p, mu_p = promote_entry(h, self.supply, self.oracle)
        comp = None
        res = merge_states(
            old_e, e_p, self.supply, self.oracle,
            intersect_domains=True, target_is_entry=True,
        )
        if res is not None:
            g, mu1, mu2 = res
            g = g.replace(vi=frozenset(VarIdentity(v, v) for v in sym_vars(g)))
            comp = self._compose_var_map(mu_p, mu2, sym_vars(g))
            if comp is not None:
                ok = check_generalization(
                    h, g, comp, self.oracle,
                    incoming_kinds=frozenset(e.kind for e in self.seg.in_edges(hid)),
                    sbar_is_entry=True,
                ).ok
                if not ok:
                    comp = None
        if comp is None:
            # cannot widen this pair; keep a separate entry for the call
            pid = self.seg.add_node(e_p)
            self.seg.entry_of[pid] = pid
            self.seg.entry_index[callee].append(pid)
            self.seg.add_edge(hid, pid, GEN, mu=mu_p)
            self.call_binding[nid] = (pid, mu_p, hid)
            self.worklist.append(pid)
            return True
        gid = self.seg.add_node(g)
        self.seg.entry_of[gid] = gid
        self.seg.add_edge(old_eid, gid, GEN, mu=mu1)
        self.seg.add_edge(hid, gid, GEN, mu=comp)
        # retire the old entry's exploration; the widened one re-explores
        self.seg.remove_edges(
            [e for e in self.seg.out_edges(old_eid) if e.kind != GEN]
        )
        for cid, (beid, bmu, bhid) in sorted(self.call_binding.items()):
            if beid != old_eid or cid not in self.seg.nodes:
                continue
            rebound = self._compose_var_map(bmu, mu1, sym_vars(g))
            if rebound is not None:
                self.call_binding[cid] = (gid, rebound, bhid)
        self.seg.entry_index[callee] = [gid]
        self.call_binding[nid] = (gid, comp, hid)
        self._gc()
        self.worklist.append(gid)
        return True

    def _maybe_intersect(self, cid: int, rid: int) -> None:
        if (cid, rid) in self.intersections:
            return
        if cid not in self.seg.nodes or rid not in self.seg.nodes:
            return
        if self.seg.has_out(rid, {GEN}):
            return
        binding = self.call_binding.get(cid)
        if binding is None:
            return
        eid, mu, hid = binding
        if eid not in self.seg.nodes or hid not in self.seg.nodes:
            return
        if not self.seg.exec_path(eid, rid):
            return
        s_c = self.seg.nodes[cid]
        s_r = self.seg.nodes[rid]
        s_ca = self.seg.nodes[hid]
        s_e = self.seg.nodes[eid]
        i_state, delta = intersect(s_c, s_r, s_ca, s_e, mu, self.supply, self.oracle)
        iid = self.seg.add_node(i_state, entry_of=self.seg.entry_of.get(cid))
        self.seg.add_edge(cid, iid, INTERSECT, ret_id=rid, delta=delta)
        self.intersections.add((cid, rid))
        self.worklist.append(iid)

    # -- repeated positions

    def _try_position_closure(self, nid: int) -> bool:
        s = self.seg.nodes[nid]
        if self.seg.has_in(nid, {REFINE, GEN}):
            return False
        func = self.seg.function_of(nid)
        aggressive = self._aggressive(func)
        candidates = self._candidate_targets(nid, s, require_ancestor=not aggressive)
        incoming = frozenset(e.kind for e in self.seg.in_edges(nid))
        for tid in candidates:
            tstate = self.seg.nodes[tid]
            mu = candidate_mu(s, tstate, self.oracle)
            if mu is None:
                continue
            res = check_generalization(
                s, tstate, mu, self.oracle,
                incoming_kinds=incoming,
                sbar_is_entry=is_entry_shaped(self.program, tstate),
            )
            if res.ok:
                self.seg.add_edge(nid, tid, GEN, mu=mu)
                return True
        if self.seg.pos_counts[s.pos] < self.cfg.merge_threshold:
            return False
        for tid in candidates:
            if self.seg.has_in(tid, {REFINE, GEN}) or self.seg.has_out(tid, {GEN}):
                continue
            res = merge_states(
                self.seg.nodes[tid], s, self.supply, self.oracle,
                intersect_domains=aggressive,
            )
            if res is None:
                continue
            g, mu1, mu2 = res
            gid = self.seg.add_node(g, entry_of=self.seg.entry_of.get(tid))
            self.seg.add_edge(tid, gid, GEN, mu=mu1)
            self.seg.add_edge(nid, gid, GEN, mu=mu2)
            drop = [e for e in self.seg.out_edges(tid) if e.kind != GEN]
            drop += [e for e in self.seg.out_edges(nid) if e.kind != GEN]
            self.seg.remove_edges(drop)
            self._gc()
            self.worklist.append(gid)
            return True
        return False

    # -- cleanup

    def _gc(self) -> None:
        keep = self.seg.reachable(self.roots)
        dead = set(self.seg.nodes) - keep
        if not dead:
            return
        self.seg.remove_nodes(dead)
        for func in list(self.returns):
            self.returns[func] = [r for r in self.returns[func] if r not in dead]
        self.call_binding = {
            c: b for c, b in self.call_binding.items() if c not in dead
        }
        self.intersections = {
            (c, r) for (c, r) in self.intersections if c not in dead and r not in dead
        }


def build_function_seg(
    program: ir.Program,
    func: str,
    entry: Optional[AbstractState] = None,
    cfg: Optional[HeuristicsConfig] = None,
    supply: Optional[VarSupply] = None,
    oracle: Optional[Oracle] = None,
) -> Seg:
    """Build the graph fragment rooted at an entry state of func."""
    b = SegBuilder(program, cfg, supply, oracle)
    if entry is None:
        b.add_root(func)
    else:
        if entry.size != 1 or not program.is_initial(entry.pos):
            raise ValueError("entry states have a single frame at a function start")
        nid = b.seg.add_node(entry)
        b.seg.entry_of[nid] = nid
        b.seg.entry_index.setdefault(func, []).append(nid)
        b.roots.append(nid)
        b.worklist.append(nid)
    b.run()
    b.seg.capped = b.capped
    return b.seg


# ---------------------------------------------------------------------------
# Completeness


@dataclass(frozen=True)
class CompletionReport:
    status: str  # complete | weakly_complete | incomplete
    obligations: Tuple[str, ...] = ()

    @property
    def is_complete(self) -> bool:
        return self.status == "complete"


def is_complete(seg: Seg, oracle: Optional[Oracle] = None) -> CompletionReport:
    oracle = oracle or DEFAULT_ORACLE
    program = seg.program
    obligations: List[str] = []
    has_err = seg.err_id is not None and seg.err_id in seg.nodes
    for nid in getattr(seg, "unprocessed", []):
        obligations.append(f"node {nid} was never processed (construction capped)")
    for nid in sorted(seg.nodes):
        s = seg.nodes[nid]
        if s.is_err:
            continue
        if not seg.out_edges(nid):
            if seg.unsat_flags.get(nid):
                continue
            if is_return_state(program, s):
                continue
            st = oracle.satisfiable(state_formula(s, oracle))
            if st.status is SatStatus.UNSAT:
                continue
            obligations.append(f"leaf {nid} at {s.pos} is not ERR, unsat, or a return state")
    for nid in sorted(seg.nodes):
        s = seg.nodes[nid]
        if s.is_err or not is_call_state(program, s):
            continue
        cas = seg.out_edges(nid, CALLABS)
        if len(cas) != 1:
            obligations.append(f"call state {nid} has {len(cas)} call abstractions")
            continue
        hid = cas[0].dst
        gens = [
            e
            for e in seg.out_edges(hid, GEN)
            if is_entry_shaped(program, seg.nodes[e.dst])
        ]
        if not gens:
            obligations.append(
                f"call abstraction {hid} lacks a generalization to an entry state"
            )
            continue
        callee = program.func_of_block(s.pos[0])
        for gedge in gens[:1]:
            reach = seg.exec_reachable(gedge.dst)
            for rid in sorted(seg.nodes):
                r = seg.nodes[rid]
                if r.is_err or not is_return_state(program, r):
                    continue
                if program.func_of_block(r.pos[0]) != callee:
                    continue
                if seg.has_out(rid, {GEN}) or rid not in reach:
                    continue
                if seg.unsat_flags.get(rid):
                    continue
                have = any(
                    e.kind == INTERSECT and e.ret_id == rid
                    for e in seg.out_edges(nid)
                )
                if not have:
                    obligations.append(
                        f"missing intersection of call state {nid} with return state {rid}"
                    )
    if obligations:
        return CompletionReport("incomplete", tuple(obligations))
    return CompletionReport("weakly_complete" if has_err else "complete")


# ---------------------------------------------------------------------------
# DOT export


_DOT_STYLES = {
    EVAL: "",
    REFINE: ' style=dashed',
    GEN: ' color="black:invis:black"',
    CALLABS: ' style=bold',
    INTERSECT: ' style=dotted',
}


def to_dot(seg: Seg) -> str:
    lines = ["digraph seg {", "  node [shape=box fontsize=10];"]
    for nid in sorted(seg.nodes):
        s = seg.nodes[nid]
        if s.is_err:
            label = "ERR"
        else:
            pos = f"{s.pos[0]}:{s.pos[1]}"
            label = f"{nid} @ {pos}\\n|KB|={len(s.kb)} |AL|={len(s.al)} |PT|={len(s.pt)}"
            if seg.unsat_flags.get(nid):
                label += "\\nunsat"
        lines.append(f'  n{nid} [label="{label}"];')
    for nid in sorted(seg.nodes):
        for e in sorted(seg.out_edges(nid), key=lambda e: (e.dst, e.kind)):
            style = _DOT_STYLES.get(e.kind, "")
            lines.append(f'  n{e.src} -> n{e.dst} [label="{e.kind}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
