from irterm import ir
from irterm.logic import Cmp, SymVar
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder


def vtxt(v):
    return f"{v.hint}#{v.id}" if isinstance(v, SymVar) else repr(v)


def ftxt(f):
    if isinstance(f, Cmp):
        return f"{vtxt(f.lhs)} {f.op} {vtxt(f.rhs)}"
    return repr(f)


program = ir.parse(branchy_program_text(0, target_instrs=60))
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True, node_cap=2000)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()

n = None
for cand in sorted(g.nodes, reverse=True):
    s = g.nodes[cand]
    if not s.is_err and s.pos == ("d0_top", 4) and any(
        e.kind == "refine" for e in g.in_edges(cand)
    ):
        n = cand
        break
lineage = [n]
while len(lineage) < 4:
    par = [e.src for e in g.in_edges(lineage[0]) if e.kind in ("refine", "eval", "gen", "intersect")]
    if not par:
        break
    lineage.insert(0, par[0])
for n in lineage:
    s = g.nodes[n]
    ins = [(e.kind, e.src) for e in g.in_edges(n)]
    print(f"--- node {n} pos={s.pos} in={ins}")
    print("    lv:", {k: vtxt(v) for k, v in s.top.lv})
    for f in s.kb:
        print("    kb:", ftxt(f))
    print("    vi:", sorted((vtxt(e.entry_var), vtxt(e.current_var)) for e in s.vi)[:8])
