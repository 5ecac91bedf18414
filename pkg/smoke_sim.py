import time

from irterm import ir
from irterm.oracle import Interpreter, initial_concrete, simulate
from irterm.seg import SegBuilder, is_complete

program = ir.parse(open("tests/fixtures/countdown.ll").read())
b = SegBuilder(program)
b.add_root("main")
g = b.run()
g.capped = b.capped
print("nodes", len(g.nodes), "completion", is_complete(g).status)

c0 = initial_concrete(program, "main")
root = g.entry_index["main"][0]
for seed, rng in [(0, (-4, 4)), (1, (-4, 4)), (7, (-8, 8)), (3, (-2, 2)), (11, (0, 5))]:
    it = Interpreter(program, seed=seed, nondet_range=rng)
    t0 = time.time()
    rep = simulate(g, c0, root, {}, max_steps=800, interp=it)
    print(
        f"seed={seed} rng={rng}: ok={rep.ok} outcome={rep.outcome} steps={rep.steps} "
        f"matches={len(rep.matches)} value={rep.value} reason={rep.reason!r} "
        f"nondets={it.nondet_log[:3]} %.1fs" % (time.time() - t0)
    )
    if not rep.ok:
        print("  path tail:", rep.matches[-8:])
