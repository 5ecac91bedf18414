from irterm import ir
from irterm.logic import render_formula
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder

program = ir.parse(branchy_program_text(0, target_instrs=60))
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True, node_cap=2000)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()

chain = []
for n in sorted(g.nodes):
    s = g.nodes[n]
    if s.is_err or s.pos != ("d0_top", 4):
        continue
    ins = [(e.kind, e.src) for e in g.in_edges(n)]
    if any(k == "refine" for k, _ in ins):
        chain.append(n)
# walk one refine lineage: parent -> child -> grandchild
n = chain[-1]
lineage = [n]
while True:
    par = [e.src for e in g.in_edges(lineage[0]) if e.kind == "refine"]
    if not par or len(lineage) > 3:
        break
    lineage.insert(0, par[0])
print("lineage", lineage)
for n in lineage:
    s = g.nodes[n]
    print(f"--- node {n} pos={s.pos} lv={{{', '.join(f'{k}:v{v.id}' for k, v in s.top.lv)}}}")
    for phi in sorted(render_formula(f) for f in s.kb):
        print("   ", phi)
