"""Translation of symbolic execution graphs to integer transition systems
and a ranking-function prover over them.

Each cyclic component of a graph becomes an ITS whose transitions relate
unprimed variables (values at the source node) to primed variables (values
at the target).  A generalization edge with instantiation mu contributes
updates v' = mu(v) for every variable of its target; every other edge keeps
its source variables unchanged.  The source node's derived state formula is
added to the condition, so the prover sees exactly the facts the graph
construction established.

Termination is shown by lexicographic affine ranking functions found by
bounded search: a function that never increases on any transition of a
component and strictly decreases while bounded below on at least one lets
us delete the strict transitions and recurse on what remains.  Certificates
record the functions and per-transition tags and are re-validated purely by
entailment, independent of the synthesis path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .astate import state_formula, sym_vars
from .logic import (
    DEFAULT_ORACLE,
    BinTerm,
    Cmp,
    Entailment,
    Formula,
    Oracle,
    SymVar,
    Term,
    eq,
    ge,
    gt,
    linearize,
    subst_term,
)
from .seg import GEN, Seg

_VALID = Entailment.VALID


# ---------------------------------------------------------------------------
# strongly connected components of a graph


def sccs(g: Seg) -> list:
    """Nontrivial strongly connected components of the graph, as frozensets.

    A component counts only if every node can reach every node (itself
    included) by a nonempty path, so isolated nodes without a self-edge are
    dropped.  All edge kinds participate: the cycle through a recursive call
    runs over the call-abstraction edge.
    """
    succs: dict = {n: [] for n in g.nodes}
    self_loop = set()
    for e in g.edges():
        succs[e.src].append(e.dst)
        if e.src == e.dst:
            self_loop.add(e.src)

    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list = []
    counter = itertools.count()

    for root in sorted(g.nodes):
        if root in index:
            continue
        # iterative Tarjan: (node, iterator over successors)
        work = [(root, iter(sorted(succs[root])))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            n, it = work[-1]
            advanced = False
            for m in it:
                if m not in index:
                    index[m] = low[m] = next(counter)
                    stack.append(m)
                    on_stack.add(m)
                    work.append((m, iter(sorted(succs[m]))))
                    advanced = True
                    break
                if m in on_stack:
                    low[n] = min(low[n], index[m])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[n])
            if low[n] == index[n]:
                comp = set()
                while True:
                    m = stack.pop()
                    on_stack.discard(m)
                    comp.add(m)
                    if m == n:
                        break
                if len(comp) > 1 or n in self_loop:
                    out.append(frozenset(comp))
    out.sort(key=min)
    return out


# ---------------------------------------------------------------------------
# integer transition systems


@dataclass(frozen=True)
class Transition:
    """One ITS transition.

    updates are functional assignments (primed target variable value as a
    term over source variables); guard is the source state's formula.  The
    condition is their union with updates spelled as v' = t atoms, so it
    references only unprimed source variables and primed target variables.
    """

    src: int
    dst: int
    updates: tuple  # tuple[tuple[SymVar, Term], ...] sorted by var id
    guard: frozenset
    condition: frozenset
    kind: str = "eval"

    def update_map(self) -> dict:
        return dict(self.updates)


def make_transition(
    src: int,
    dst: int,
    updates: Mapping[SymVar, Term],
    guard: Iterable[Formula],
    prime: Mapping[SymVar, SymVar],
    kind: str = "eval",
) -> Transition:
    ups = tuple(sorted(updates.items(), key=lambda kv: kv[0].id))
    guard = frozenset(guard)
    cond = guard | frozenset(eq(prime[v], t) for v, t in ups)
    return Transition(src, dst, ups, guard, cond, kind)


@dataclass(frozen=True, eq=False)
class Its:
    """An integer transition system extracted from one graph component."""

    locations: tuple  # sorted node ids
    transitions: tuple  # tuple[Transition, ...]
    prime: Mapping[SymVar, SymVar]  # v -> v'
    vsym: Mapping[int, frozenset]  # location -> its symbolic variables

    def primed(self, t: Term) -> Term:
        return subst_term(t, self.prime)


def extract_its(g: Seg, scc: Iterable[int], oracle: Optional[Oracle] = None) -> Its:
    """Build the ITS of one strongly connected component of the graph."""
    oracle = oracle or DEFAULT_ORACLE
    nodes = sorted(scc)
    node_set = set(nodes)
    vsym = {n: sym_vars(g.state(n)) for n in nodes}
    allvars = sorted(frozenset().union(*vsym.values()) if vsym else frozenset(), key=lambda v: v.id)
    base = max((v.id for v in allvars), default=-1) + 1
    prime = {
        v: SymVar(base + i, hint=(v.hint or f"v{v.id}") + "'")
        for i, v in enumerate(allvars)
    }

    inner = [e for e in g.edges() if e.src in node_set and e.dst in node_set]
    inner.sort(key=lambda e: (e.src, e.dst, e.kind, -1 if e.ret_id is None else e.ret_id))
    transitions = []
    for e in inner:
        guard = state_formula(g.state(e.src), oracle)
        if e.kind == GEN:
            updates = {}
            for v in sorted(vsym[e.dst], key=lambda v: v.id):
                t = e.mu.get(v)
                if t is None:
                    raise ValueError(f"generalization {e.src}->{e.dst} misses {v!r}")
                updates[v] = t
        else:
            updates = {v: v for v in vsym[e.src]}
        transitions.append(make_transition(e.src, e.dst, updates, guard, prime, e.kind))
    return Its(tuple(nodes), tuple(transitions), prime, vsym)


def its_text(its: Its) -> str:
    """Plain-text form, one transition per line: `src -> dst :: a && b && ...`.

    Variables print as v<id>, primed ones as v<id>' (the id of the unprimed
    original).  Atoms are sorted; an empty condition prints as `true`.
    """
    names = {}
    for v, vp in its.prime.items():
        names[v] = f"v{v.id}"
        names[vp] = f"v{v.id}'"

    def term(t: Term) -> str:
        if isinstance(t, int):
            return str(t)
        if isinstance(t, SymVar):
            return names.get(t, f"v{t.id}")
        return f"({term(t.lhs)} {t.op} {term(t.rhs)})"

    def atom(phi: Formula) -> str:
        if isinstance(phi, Cmp):
            return f"{term(phi.lhs)} {phi.op} {term(phi.rhs)}"
        # graph state formulas are conjunctions of atoms; anything else is
        # rendered structurally so the export never fails
        return repr(phi)

    lines = []
    for t in its.transitions:
        cond = " && ".join(sorted(atom(p) for p in t.condition)) or "true"
        lines.append(f"{t.src} -> {t.dst} :: {cond}")
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# affine ranking functions


@dataclass(frozen=True)
class Affine:
    """An affine function sum(coeff * var) + const."""

    coeffs: tuple  # tuple[tuple[SymVar, int], ...] sorted by var id
    const: int = 0

    @staticmethod
    def of(coeffs: Mapping[SymVar, int], const: int = 0) -> "Affine":
        items = tuple(sorted(((v, c) for v, c in coeffs.items() if c), key=lambda kv: kv[0].id))
        return Affine(items, const)

    def term(self) -> Term:
        t: Term = self.const
        for v, c in self.coeffs:
            piece: Term = v if c == 1 else _scale(v, c)
            t = piece if t == 0 else _add(t, piece)
        return t

    def variables(self) -> frozenset:
        return frozenset(v for v, _ in self.coeffs)

    def render(self) -> str:
        parts = []
        for v, c in self.coeffs:
            name = v.hint or f"v{v.id}"
            parts.append(name if c == 1 else f"{c}*{name}")
        if self.const or not parts:
            parts.append(str(self.const))
        return " + ".join(parts)


def _scale(v: SymVar, c: int) -> Term:
    return BinTerm("*", c, v)


def _add(a: Term, b: Term) -> Term:
    return BinTerm("+", a, b)


@dataclass(frozen=True)
class Stage:
    """One lexicographic tier: functions per location and transition tags."""

    index: int
    tier: int  # search tier the function came from (1..3)
    functions: Mapping[int, Affine]  # location -> ranking function
    strict: frozenset  # transition indices deleted by this stage
    nonincreasing: frozenset


@dataclass(frozen=True)
class RankingCertificate:
    stages: tuple  # tuple[Stage, ...] in lexicographic order


@dataclass(frozen=True)
class Terminating:
    certificate: RankingCertificate


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


@dataclass(frozen=True)
class Budget:
    tiers: int = 3
    per_tier: int = 500


# ---------------------------------------------------------------------------
# synthesis


def _cyclic_parts(its: Its, tids: Iterable[int]) -> list:
    """Split a transition set into per-component sets that still lie on cycles.

    Transitions not inside any strongly connected component can fire only
    finitely often between components, so they carry no proof obligation.
    """
    tids = sorted(tids)
    succs: dict = {}
    for ti in tids:
        t = its.transitions[ti]
        succs.setdefault(t.src, []).append((t.dst, ti))
        succs.setdefault(t.dst, [])

    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comp_of: dict = {}
    counter = itertools.count()
    comps = 0

    for root in sorted(succs):
        if root in index:
            continue
        work = [(root, iter(sorted(succs[root])))]
        index[root] = low[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        while work:
            n, it = work[-1]
            advanced = False
            for m, _ in it:
                if m not in index:
                    index[m] = low[m] = next(counter)
                    stack.append(m)
                    on_stack.add(m)
                    work.append((m, iter(sorted(succs[m]))))
                    advanced = True
                    break
                if m in on_stack:
                    low[n] = min(low[n], index[m])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[n])
            if low[n] == index[n]:
                while True:
                    m = stack.pop()
                    on_stack.discard(m)
                    comp_of[m] = comps
                    if m == n:
                        break
                comps += 1

    groups: dict = {}
    for ti in tids:
        t = its.transitions[ti]
        if comp_of[t.src] == comp_of[t.dst]:
            groups.setdefault(comp_of[t.src], set()).add(ti)
    return [frozenset(g) for _, g in sorted(groups.items(), key=lambda kv: min(kv[1]))]


def _threaded_vars(its: Its, tids: Iterable[int]) -> list:
    """Variables updated (hence primed) on every transition of the set."""
    common: Optional[set] = None
    for ti in tids:
        dom = {v for v, _ in its.transitions[ti].updates}
        common = dom if common is None else common & dom
    return sorted(common or (), key=lambda v: v.id)


def _tier1(its: Its, tids) -> Iterable[Mapping[int, Affine]]:
    locs = _locs_of(its, tids)
    for v in _threaded_vars(its, tids):
        for c in (1, -1):
            f = Affine.of({v: c})
            yield {l: f for l in locs}


def _tier2(its: Its, tids) -> Iterable[Mapping[int, Affine]]:
    locs = _locs_of(its, tids)
    threaded = _threaded_vars(its, tids)
    # scaled and shifted single variables first, then variable pairs
    for v in threaded:
        for a in (1, -1, 2, -2, 3, -3):
            for c in range(-3, 4):
                if a in (1, -1) and c == 0:
                    continue  # tier 1 already tried these
                f = Affine.of({v: a}, c)
                yield {l: f for l in locs}
    for x, y in itertools.combinations(threaded, 2):
        for a in (1, -1, 2, -2, 3, -3):
            for b in (1, -1, 2, -2, 3, -3):
                f = Affine.of({x: a, y: b})
                yield {l: f for l in locs}


def _invert_updates(t: Transition) -> Optional[dict]:
    """Map source variable w -> (target var v, shift k) when v' = w + k.

    Only unit-coefficient single-variable updates invert; anything else
    blocks propagation through this transition.
    """
    inv: dict = {}
    for v, term in t.updates:
        lin = linearize(term)
        if lin is None:
            continue
        coeffs, k = lin
        if len(coeffs) == 1:
            (w, c), = coeffs.items()
            if c == 1 and w not in inv:
                inv[w] = (v, k)
    return inv


def _transport(f: Affine, inv: dict) -> Optional[Affine]:
    """Rewrite an affine function over source variables into target variables."""
    coeffs: dict = {}
    const = f.const
    for w, c in f.coeffs:
        if w not in inv:
            return None
        v, k = inv[w]
        coeffs[v] = coeffs.get(v, 0) + c
        const -= c * k
    return Affine.of(coeffs, const)


def _tier3(its: Its, tids) -> Iterable[Mapping[int, Affine]]:
    """Seed a single variable at one location and propagate along updates."""
    locs = _locs_of(its, tids)
    succ: dict = {l: [] for l in locs}
    for ti in tids:
        t = its.transitions[ti]
        succ[t.src].append(ti)
    seeds = sorted(frozenset().union(*(its.vsym.get(l, frozenset()) for l in locs)), key=lambda v: v.id)
    for l0 in locs:
        for v in seeds:
            funcs: dict = {l0: Affine.of({v: 1})}
            queue = [l0]
            ok = True
            while queue and ok:
                l = queue.pop(0)
                for ti in succ[l]:
                    t = its.transitions[ti]
                    moved = _transport(funcs[l], _invert_updates(t))
                    if moved is None:
                        ok = False
                        break
                    if t.dst in funcs:
                        if funcs[t.dst] != moved:
                            ok = False
                            break
                    else:
                        funcs[t.dst] = moved
                        queue.append(t.dst)
            if ok and set(funcs) == set(locs):
                yield dict(funcs)


def _locs_of(its: Its, tids) -> list:
    locs = set()
    for ti in tids:
        locs.add(its.transitions[ti].src)
        locs.add(its.transitions[ti].dst)
    return sorted(locs)


def _try_candidate(its: Its, tids, funcs: Mapping[int, Affine], oracle: Oracle):
    """Check one candidate; return the strict transition set or None."""
    strict = set()
    for ti in sorted(tids):
        t = its.transitions[ti]
        r_src = funcs[t.src].term()
        r_dst = its.primed(funcs[t.dst].term())
        if oracle.entails(t.condition, ge(r_src, r_dst)) is not _VALID:
            return None
        if (
            oracle.entails(t.condition, gt(r_src, r_dst)) is _VALID
            and oracle.entails(t.condition, ge(r_src, 0)) is _VALID
        ):
            strict.add(ti)
    return frozenset(strict) if strict else None


_TIERS = {1: _tier1, 2: _tier2, 3: _tier3}


def prove_termination(
    its: Its,
    budget: Optional[Budget] = None,
    oracle: Optional[Oracle] = None,
):
    """Prove the ITS terminating by lexicographic affine ranking search.

    Every run eventually stays inside one cyclic component of the remaining
    transitions, so components are handled independently: find a function
    that is nonincreasing on the whole component and strict + bounded on at
    least one transition, delete the strict ones, and repeat on whatever
    cycles survive.  Returns Terminating(certificate) or Unknown.
    """
    budget = budget or Budget()
    oracle = oracle or DEFAULT_ORACLE
    pending = _cyclic_parts(its, range(len(its.transitions)))
    stages = []
    while pending:
        tids = pending.pop(0)
        found = None
        for tier in range(1, budget.tiers + 1):
            gen = _TIERS.get(tier)
            if gen is None:
                break
            for funcs in itertools.islice(gen(its, tids), budget.per_tier):
                strict = _try_candidate(its, tids, funcs, oracle)
                if strict is not None:
                    found = (tier, funcs, strict)
                    break
            if found:
                break
        if not found:
            return Unknown(f"no ranking function for component {sorted(_locs_of(its, tids))}")
        tier, funcs, strict = found
        stages.append(
            Stage(
                index=len(stages),
                tier=tier,
                functions={l: funcs[l] for l in _locs_of(its, tids)},
                strict=strict,
                nonincreasing=frozenset(tids) - strict,
            )
        )
        pending.extend(_cyclic_parts(its, frozenset(tids) - strict))
    return Terminating(RankingCertificate(tuple(stages)))


# ---------------------------------------------------------------------------
# certificate checking (entailment only, independent of synthesis)


def check_certificate(its: Its, cert: RankingCertificate, oracle: Optional[Oracle] = None) -> bool:
    """Re-validate a certificate by replaying its stages.

    Each stage must tag every still-live transition between its locations,
    every tag must be entailed by the transition's condition, and after all
    stages no transition may remain on a cycle.  Any Unknown entailment
    fails the check.
    """
    oracle = oracle or DEFAULT_ORACLE
    remaining = set()
    for part in _cyclic_parts(its, range(len(its.transitions))):
        remaining |= part
    for stage in sorted(cert.stages, key=lambda st: st.index):
        locs = set(stage.functions)
        covered = {
            ti
            for ti in remaining
            if its.transitions[ti].src in locs and its.transitions[ti].dst in locs
        }
        tagged = stage.strict | stage.nonincreasing
        if stage.strict & stage.nonincreasing:
            return False
        if covered - tagged or not stage.strict:
            return False
        if not (tagged <= remaining):
            return False
        for ti in sorted(tagged):
            t = its.transitions[ti]
            r_src = stage.functions[t.src].term()
            r_dst = its.primed(stage.functions[t.dst].term())
            if oracle.entails(t.condition, ge(r_src, r_dst)) is not _VALID:
                return False
            if ti in stage.strict:
                if oracle.entails(t.condition, gt(r_src, r_dst)) is not _VALID:
                    return False
                if oracle.entails(t.condition, ge(r_src, 0)) is not _VALID:
                    return False
        remaining -= stage.strict
        live = set()
        for part in _cyclic_parts(its, remaining):
            live |= part
        remaining = live
    return not remaining


def certificate_json(cert: RankingCertificate) -> dict:
    """JSON-ready form of a certificate (variables as v<id>)."""
    stages = []
    for st in sorted(cert.stages, key=lambda st: st.index):
        stages.append(
            {
                "index": st.index,
                "tier": st.tier,
                "functions": {
                    str(loc): {
                        "coeffs": {f"v{v.id}": c for v, c in f.coeffs},
                        "const": f.const,
                        "text": f.render(),
                    }
                    for loc, f in sorted(st.functions.items())
                },
                "strict": sorted(st.strict),
                "nonincreasing": sorted(st.nonincreasing),
            }
        )
    return {"stages": stages}
