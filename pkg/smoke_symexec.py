import sys

sys.path.insert(0, "src")

from irterm import ir, logic
from irterm.astate import (
    AbstractState,
    Allocation,
    StackFrame,
    VarIdentity,
    VarSupply,
    mk_lv,
    state_formula,
    sym_vars,
)
from irterm.logic import DEFAULT_ORACLE, Entailment, eq, lt, ge
from irterm.symexec import Called, ErrStep, Evaluated, NeedsRefinement, Returned, refine, step

prog = ir.parse(open("tests/fixtures/countdown.ll").read())
oracle = DEFAULT_ORACLE
supply = VarSupply()

v_p = supply.fresh("v_p")
frame = StackFrame(("entry", 0), mk_lv({"p": v_p}))
A = AbstractState(
    frames=(frame,),
    kb=frozenset(),
    al=frozenset({Allocation(v_p, v_p)}),
    pt=frozenset(),
    vi=frozenset(),
)
A = A.replace(vi=frozenset(VarIdentity(v, v) for v in sym_vars(A)))
print("A:", A.pos, sorted(str(e) for e in A.vi))

out = step(prog, A, supply, oracle)
assert isinstance(out, Evaluated), out
B = out.state
print("B:", B.pos, "pt:", sorted(str(p) for p in B.pt))
assert B.pos == ("entry", 1)
pval = B.top.lv_get("pval")
assert any(p.addr == v_p and p.value == pval for p in B.pt)
# VI keeps the entry identity
assert VarIdentity(v_p, v_p) in B.vi

out = step(prog, B, supply, oracle)
assert isinstance(out, NeedsRefinement), out
cond = out.condition
print("refine on:", logic.render_formula(cond))
B_then, B_else = refine(B, cond, oracle)

# negative branch: icmp gives 1, br goes to term
out = step(prog, B_then, supply, oracle)
assert isinstance(out, Evaluated)
s = out.state
ric = s.top.lv_get("ricmp")
assert eq(ric, 1) in s.kb
out = step(prog, s, supply, oracle)
assert isinstance(out, Evaluated)
C = out.state
print("C:", C.pos)
assert C.pos == ("term", 0)

out = step(prog, C, supply, oracle)
assert isinstance(out, Evaluated), out
D = out.state
print("D:", D.pos, "al:", set(D.al), "pt:", set(D.pt))
assert D.pos == ("term", 1)
assert D.al == frozenset() and D.pt == frozenset()

# non-negative branch: icmp gives 0, br goes to rec
out = step(prog, B_else, supply, oracle)
assert isinstance(out, Evaluated)
s = out.state
assert eq(s.top.lv_get("ricmp"), 0) in s.kb
out = step(prog, s, supply, oracle)
assert isinstance(out, Evaluated)
E = out.state
print("E:", E.pos)
assert E.pos == ("rec", 0)

out = step(prog, E, supply, oracle)
assert isinstance(out, Evaluated)
F0 = out.state
dec = F0.top.lv_get("dec")
phi = state_formula(F0, oracle)
assert oracle.entails(phi, eq(dec, logic.BinTerm("-", pval, 1))) is Entailment.VALID
print("F0: dec = pval - 1 holds")

out = step(prog, F0, supply, oracle)
assert isinstance(out, Evaluated)
F = out.state
print("F:", F.pos, "pt:", sorted(str(p) for p in F.pt))
assert F.pt == frozenset({next(iter(F.pt))})
(ptf,) = F.pt
assert ptf.addr == v_p and ptf.value == dec

out = step(prog, F, supply, oracle)
assert isinstance(out, Called), out
G = out.state
print("G frames:", [fr.pos for fr in G.frames], "ret tgt:", G.frames[1].return_target)
assert G.size == 2
assert G.frames[0].pos == ("entry", 0)
assert G.frames[1].pos == ("rec", 2)
assert G.frames[1].return_target == "rrec"
pbar = G.frames[0].lv_get("p")
phi = state_formula(G, oracle)
assert oracle.entails(phi, eq(pbar, v_p)) is Entailment.VALID
# VI picked up the provable equality to the fresh parameter
assert VarIdentity(v_p, pbar) in G.vi

# simulate the callee reaching ret: bind pval in the callee frame, then ret
pv2 = supply.fresh("v_pval")
top2 = G.frames[0].with_lv({"p": pbar, "pval": pv2}, pos=("term", 1))
H = G.replace(frames=(top2,) + G.frames[1:], kb=G.kb | {lt(pv2, 0)})
out = step(prog, H, supply, oracle)
assert isinstance(out, Returned), out
R = out.state
print("R:", R.pos, "rrec bound:", R.top.lv_get("rrec"))
assert R.size == 1
assert R.pos == ("rec", 3)
rr = R.top.lv_get("rrec")
assert rr is not None
phi = state_formula(R, oracle)
assert oracle.entails(phi, eq(rr, pv2)) is Entailment.VALID
assert R.top.return_target is None

# unsafe: load through a variable with no allocation
v_q = supply.fresh("v_q")
bad = AbstractState(
    frames=(StackFrame(("entry", 0), mk_lv({"p": v_q})),),
    kb=frozenset(),
    al=frozenset(),
    pt=frozenset(),
    vi=frozenset(),
)
out = step(prog, bad, supply, oracle)
assert isinstance(out, ErrStep), out
print("unsafe load ->", out.reason)

print("symexec smoke OK")
