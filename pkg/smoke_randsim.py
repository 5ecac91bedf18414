import sys
import time

from irterm import ir
from irterm.oracle import Interpreter, initial_concrete, simulate
from irterm.randprog import random_program_text
from irterm.seg import SegBuilder, is_complete

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
t_all = time.time()
worst = (0.0, -1)
statuses = {}
bad = []
for seed in range(n):
    t0 = time.time()
    program = ir.parse(random_program_text(seed))
    b = SegBuilder(program)
    b.add_root("main")
    g = b.run()
    g.capped = b.capped
    status = is_complete(g).status
    statuses[status] = statuses.get(status, 0) + 1
    it = Interpreter(program, seed=seed, nondet_range=(-8, 8))
    c0 = initial_concrete(program, "main")
    root = g.entry_index["main"][0]
    rep = simulate(g, c0, root, {}, max_steps=200, interp=it)
    dt = time.time() - t0
    if dt > worst[0]:
        worst = (dt, seed)
    if not rep.ok:
        bad.append(seed)
        print(f"seed {seed}: MISMATCH {rep.reason!r} at steps={rep.steps}")
        print("  path:", rep.matches[-6:])
        print(ir.format_program(program) if hasattr(ir, "format_program") else random_program_text(seed))
print(f"{n} seeds in %.1fs (worst %.2fs at seed %d), statuses={statuses}, mismatches={bad}"
      % (time.time() - t_all, worst[0], worst[1]))
