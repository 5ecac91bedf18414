import time

from irterm import ir
from irterm.astate import ERR
from irterm.oracle import Halted, Interpreter, initial_concrete
from irterm.randprog import branchy_program_text, random_program_text

counts = []
t0 = time.time()
outcomes = {"halt": 0, "err": 0, "cap": 0}
for seed in range(100):
    text = random_program_text(seed)
    try:
        program = ir.parse(text)
    except Exception as exc:
        print(f"seed {seed}: PARSE FAIL {exc}")
        print(text)
        break
    counts.append(program.instruction_count())
    if program.instruction_count() > 40:
        print(f"seed {seed}: too big ({program.instruction_count()})")
    it = Interpreter(program, seed=seed, nondet_range=(-8, 8))
    c0 = initial_concrete(program, "main")
    out, steps = it.run(c0, max_steps=200)
    if isinstance(out, Halted):
        outcomes["halt"] += 1
    elif out is ERR:
        outcomes["err"] += 1
        print(f"seed {seed}: concrete ERR after {steps} steps")
        print(text)
    else:
        outcomes["cap"] += 1
        print(f"seed {seed}: hit step cap")
print(f"instrs min/avg/max = {min(counts)}/{sum(counts)/len(counts):.1f}/{max(counts)}")
print("outcomes", outcomes, "interp time %.1fs" % (time.time() - t0))

text = branchy_program_text(0)
program = ir.parse(text)
print("branchy instruction_count:", program.instruction_count())
labels = [b.name for f in program.functions.values() for b in f.blocks]
assert len(labels) == len(set(labels)), "duplicate labels"
print("branchy labels unique:", len(labels))
