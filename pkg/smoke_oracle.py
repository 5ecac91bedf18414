import time

from irterm import ir
from irterm.astate import ERR
from irterm.oracle import (
    Halted,
    Interpreter,
    concrete_violations,
    initial_concrete,
    interpretation_of,
    is_concrete,
    sl_holds,
)
from irterm.astate import sl_state_formula
from irterm.logic import DEFAULT_ORACLE

program = ir.parse(open("tests/fixtures/countdown.ll").read())

# find a seed where istart is a small positive so runs are short
for seed in range(50):
    it = Interpreter(program, seed=seed, nondet_range=(-4, 4))
    v = it.rng.randint(-4, 4)
    if 1 <= v <= 3:
        print("seed", seed, "first nondet", v)
        break

it = Interpreter(program, seed=seed, nondet_range=(-4, 4))
c0 = initial_concrete(program, "main")
print("c0 concrete:", is_concrete(c0))

c = c0
trace = []
t0 = time.time()
for i in range(400):
    out = it.step(c)
    if out is ERR or isinstance(out, Halted):
        trace.append(out)
        break
    c = out
    trace.append(c)
print("steps", len(trace), "outcome", trace[-1], "in %.2fs" % (time.time() - t0))
print("nondets", it.nondet_log)

# Def 3 on a few intermediate states
for idx in [0, 3, 7, len(trace) // 2, len(trace) - 2]:
    st = trace[idx]
    if st is ERR or isinstance(st, Halted):
        continue
    v = concrete_violations(st)
    print(f"state {idx}: size={st.size} pos={st.pos} pt={len(st.pt)} viol={v}")

# self-representation: <c>_SL holds under the identity closing assignment
mid = trace[min(9, len(trace) - 2)]
if not (mid is ERR or isinstance(mid, Halted)):
    from irterm.oracle import concrete_env

    env = concrete_env(mid)
    interp = interpretation_of(mid)
    phi = sl_state_formula(mid, DEFAULT_ORACLE)
    print("self sl_holds:", sl_holds(interp, phi, env))
