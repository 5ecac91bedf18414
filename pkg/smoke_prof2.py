import cProfile
import pstats
import sys
import time

from irterm import ir
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder

t = int(sys.argv[1]) if len(sys.argv) > 1 else 60
program = ir.parse(branchy_program_text(0, target_instrs=t))
print("instrs", program.instruction_count(), flush=True)
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True)
prof = cProfile.Profile()
prof.enable()
t0 = time.time()
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
prof.disable()
print("nodes", len(g.nodes), "%.1fs" % (time.time() - t0))
pstats.Stats(prof).sort_stats("cumulative").print_stats(18)
