import sys, time

sys.path.insert(0, "src")
from irterm import ir
from irterm.astate import is_entry_shaped, is_return_state, state_formula
from irterm.logic import DEFAULT_ORACLE, Entailment, lt, ge
from irterm.seg import (
    CALLABS,
    GEN,
    INTERSECT,
    HeuristicsConfig,
    SegBuilder,
    is_complete,
)

program = ir.parse(open("tests/fixtures/countdown.ll").read())
t0 = time.time()
b = SegBuilder(program)
b.add_root("main")
seg = b.run()
seg.capped = b.capped
print(f"built in {time.time()-t0:.2f}s nodes={len(seg.nodes)} capped={b.capped}")

rep = is_complete(seg)
print("completion:", rep.status)
for o in rep.obligations:
    print("  OB:", o)

fn = seg.function_of
f_nodes = sorted(n for n in seg.nodes if fn(n) == "f")
m_nodes = sorted(n for n in seg.nodes if fn(n) == "main")
print("f entries:", seg.entry_index.get("f"), "main entries:", seg.entry_index.get("main"))
print("f nodes:", [(n, seg.nodes[n].pos, seg.nodes[n].size) for n in f_nodes])

callabs_f = [(e.src, e.dst) for e in seg.edges() if e.kind == CALLABS and fn(e.src) == "f"]
print("callabs edges in f:", callabs_f)
gens_f = [(e.src, e.dst) for e in seg.edges() if e.kind == GEN and fn(e.src) == "f"]
print("gen edges in f:", gens_f)
inter_f = [(e.src, e.dst, e.ret_id) for e in seg.edges() if e.kind == INTERSECT and fn(e.src) == "f"]
print("intersections in f:", inter_f)
ret_leaves = [
    (n, seg.nodes[n].pos)
    for n in f_nodes
    if is_return_state(program, seg.nodes[n]) and not seg.out_edges(n)
]
print("f return leaves:", ret_leaves)

merged = [
    n
    for n in f_nodes
    if is_return_state(program, seg.nodes[n])
    and len(seg.in_edges(n, GEN)) >= 2
]
print("merged return states in f:", merged)
for k in merged:
    ks = seg.nodes[k]
    phi = state_formula(ks, DEFAULT_ORACLE)
    pval = ks.top.lv_get("pval")
    rrec = ks.top.lv_get("rrec")
    print("  K =", k, "pos", ks.pos)
    print("  KB:", sorted(str(f) for f in ks.kb))
    print("  pval>=0:", DEFAULT_ORACLE.entails(phi, ge(pval, 0)))
    print("  rrec<0:", DEFAULT_ORACLE.entails(phi, lt(rrec, 0)))
    print("  VI:", sorted(str(v) for v in ks.vi))

inter_m = [
    (e.src, e.dst, e.ret_id, bool(seg.unsat_flags.get(e.dst)))
    for e in seg.edges()
    if e.kind == INTERSECT and fn(e.src) == "main"
]
print("intersections in main (src,dst,ret,unsat):", inter_m)
gens_m = [(e.src, e.dst) for e in seg.edges() if e.kind == GEN and fn(e.src) == "main"]
print("gen edges in main:", gens_m)
loop0 = [n for n in m_nodes if seg.nodes[n].pos == ("loop", 0)]
print("main (loop,0) states:", loop0)
vm = [n for n in loop0 if len(seg.in_edges(n, GEN)) >= 2]
print("merged loop cover:", vm)
for v in vm:
    vs = seg.nodes[v]
    print("  V_m KB:", sorted(str(f) for f in vs.kb))
