import time

from irterm import ir
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder, is_complete

program = ir.parse(branchy_program_text(0))
print("instructions:", program.instruction_count())

t0 = time.time()
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
g.capped = b.capped
print("heuristics on: nodes=%d capped=%s status=%s in %.1fs"
      % (len(g.nodes), g.capped, is_complete(g).status, time.time() - t0))

t0 = time.time()
cfg = HeuristicsConfig(aggressive_merge=False, unique_entry=False)
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
g.capped = b.capped
print("heuristics off: nodes=%d capped=%s status=%s in %.1fs"
      % (len(g.nodes), g.capped, is_complete(g).status, time.time() - t0))
