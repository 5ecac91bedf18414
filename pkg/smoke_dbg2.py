from collections import Counter

from irterm import ir
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder

program = ir.parse(branchy_program_text(0, target_instrs=60))
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True, node_cap=2000)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
g.capped = b.capped
print("nodes", len(g.nodes), "capped", g.capped)

# who feeds the crowded d0_top nodes, and how late do they appear?
ids = sorted(n for n in g.nodes if not g.nodes[n].is_err and g.nodes[n].pos[0] == "d0_top")
print("d0_top count", len(ids), "id range", ids[0], "..", ids[-1])
for n in ids[-6:]:
    s = g.nodes[n]
    ins = [(e.kind, e.src, g.nodes[e.src].pos if e.src in g.nodes else None) for e in g.in_edges(n)]
    print(f"  node {n} pos={s.pos} in={ins[:3]}")

# intersect edge count per call position
inter = Counter()
for e in g.edges():
    if e.kind == "intersect":
        inter[g.nodes[e.src].pos] += 1
print("intersections per call pos:", dict(inter))

# gen edges: where do they point?
for e in g.edges():
    if e.kind == "gen" and g.nodes[e.dst].pos[0].startswith("u"):
        pass
gen_pos = Counter((g.nodes[e.src].pos[0], g.nodes[e.dst].pos[0]) for e in g.edges() if e.kind == "gen")
print("gen (src blk -> dst blk):", dict(gen_pos))
