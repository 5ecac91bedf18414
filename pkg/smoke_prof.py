import cProfile
import pstats
import sys
import time

from irterm import ir
from irterm.randprog import branchy_program_text
from irterm.seg import HeuristicsConfig, SegBuilder

target = int(sys.argv[1]) if len(sys.argv) > 1 else 400

for t in (100, 200, 400):
    program = ir.parse(branchy_program_text(0, target_instrs=t))
    cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True)
    t0 = time.time()
    b = SegBuilder(program, cfg)
    b.add_root("main")
    g = b.run()
    print("target=%d instrs=%d nodes=%d %.1fs" % (t, program.instruction_count(), len(g.nodes), time.time() - t0))

program = ir.parse(branchy_program_text(0, target_instrs=target))
cfg = HeuristicsConfig(aggressive_merge=True, unique_entry=True)
prof = cProfile.Profile()
prof.enable()
b = SegBuilder(program, cfg)
b.add_root("main")
g = b.run()
prof.disable()
stats = pstats.Stats(prof)
stats.sort_stats("cumulative").print_stats(22)
