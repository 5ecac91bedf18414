from collections import Counter

from irterm import ir
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder

program = ir.parse(branchy_program_text(0, target_instrs=60))
print("instrs", program.instruction_count())
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
g.capped = b.capped
print("nodes", len(g.nodes), "capped", g.capped)

pos_hist = Counter(g.nodes[n].pos[0] for n in g.nodes if not g.nodes[n].is_err)
for blk, cnt in pos_hist.most_common(12):
    print(f"  {blk}: {cnt}")
kinds = Counter(e.kind for e in g.edges())
print("edge kinds", dict(kinds))

# states at the most crowded position
blk = pos_hist.most_common(1)[0][0]
ids = [n for n in g.nodes if not g.nodes[n].is_err and g.nodes[n].pos[0] == blk]
for n in sorted(ids)[:6]:
    s = g.nodes[n]
    ins = [(e.kind, e.src) for e in g.in_edges(n)]
    outs = [(e.kind, e.dst) for e in g.out_edges(n)]
    print(f"  node {n} pos={s.pos} kb={len(s.kb)} lv={len(s.top.lv)} in={ins[:4]} out={outs[:4]}")
