import sys

sys.path.insert(0, "src")
from irterm import ir
from irterm.astate import state_formula
from irterm.logic import DEFAULT_ORACLE, Entailment, gt, lt
from irterm.seg import GEN, INTERSECT, SegBuilder, is_complete

program = ir.parse(open("tests/fixtures/countdown.ll").read())
b = SegBuilder(program)
b.add_root("main")
seg = b.run()
seg.capped = b.capped
print("completion:", is_complete(seg).status, "nodes:", len(seg.nodes))

fn = seg.function_of
m_nodes = sorted(n for n in seg.nodes if fn(n) == "main")
for n in m_nodes:
    s = seg.nodes[n]
    outs = [(e.kind, e.dst) for e in seg.out_edges(n)]
    flags = " unsat" if seg.unsat_flags.get(n) else ""
    print(f"  {n}: {s.pos} size={s.size} dom={sorted(s.top.lv_dom())} -> {outs}{flags}")

print("\nmain intersections:")
for e in seg.edges():
    if e.kind == INTERSECT and fn(e.src) == "main":
        print(f"  {e.src} -> {e.dst} (ret {e.ret_id}) unsat={bool(seg.unsat_flags.get(e.dst))}")

print("\nmain gen edges:")
for e in seg.edges():
    if e.kind == GEN and fn(e.src) == "main":
        dst = seg.nodes[e.dst]
        print(f"  {e.src} -> {e.dst} @ {dst.pos}")
        print("    mu:", e.mu)
        src_phi = state_formula(seg.nodes[e.src], DEFAULT_ORACLE)
        # decrease facts on the source for the i slot
        sd = seg.nodes[e.src]
        if "i" in sd.top.lv_dom():
            vi_src = sd.top.lv_get("i")
            vi_dst = dst.top.lv_get("i") if "i" in dst.top.lv_dom() else None
            if vi_dst is not None and e.mu is not None:
                img = e.mu.get(vi_dst)
                print(
                    "    mu(i) =", img,
                    "| src |= mu(i) < i:",
                    DEFAULT_ORACLE.entails(src_phi, lt(img, vi_src)),
                    "| src |= i > 0:",
                    DEFAULT_ORACLE.entails(src_phi, gt(vi_src, 0)),
                )
cover = [n for n in m_nodes if len(seg.in_edges(n, GEN)) >= 2]
print("\nmerged covers in main:", cover)
for n in cover:
    print("  ", n, seg.nodes[n].pos, sorted(str(f) for f in seg.nodes[n].kb))
