from irterm import ir
from irterm.oracle import Interpreter, initial_concrete, simulate
from irterm.seg import SegBuilder, is_complete

for name in ["use_after_free", "oob_store", "double_free", "spin"]:
    program = ir.parse(open(f"tests/fixtures/{name}.ll").read())
    b = SegBuilder(program)
    b.add_root("main")
    g = b.run()
    g.capped = b.capped
    rep = is_complete(g)
    has_err = any(g.state(n).is_err for n in g.nodes)
    print(f"{name}: nodes={len(g.nodes)} completion={rep.status} err_node={has_err}", end="")
    if has_err:
        print(f" reasons={sorted(set(g.err_reasons))[:2]}", end="")
    print()
    if name == "spin":
        continue
    c0 = initial_concrete(program, "main")
    root = g.entry_index["main"][0]
    for seed in (0, 1, 2):
        it = Interpreter(program, seed=seed, nondet_range=(-3, 3))
        r = simulate(g, c0, root, {}, max_steps=300, interp=it)
        print(f"  seed={seed}: ok={r.ok} outcome={r.outcome} steps={r.steps} reason={r.reason!r}")

# budget exhaustion inside a callee sub-run must fall back to the call abstraction
program = ir.parse(open("tests/fixtures/countdown.ll").read())
b = SegBuilder(program)
b.add_root("main")
g = b.run()
g.capped = b.capped
c0 = initial_concrete(program, "main")
root = g.entry_index["main"][0]
it = Interpreter(program, seed=0, nondet_range=(-4, 4))  # istart = 2, full run is 64 steps
r = simulate(g, c0, root, {}, max_steps=20, interp=it)
print(f"tight budget: ok={r.ok} outcome={r.outcome} steps={r.steps} matches={len(r.matches)} reason={r.reason!r}")
