"""Seeded random programs for differential testing.

Generated programs are memory safe by construction: every access goes
through a pointer that is still allocated on that path, loop counters
strictly decrease toward their guard, and recursion decreases an integer
argument.  Stored values are interval-tracked at generation time so byte
cells never wrap, keeping the mathematical integers of the symbolic side
and the two's-complement bytes of the concrete side in agreement.

Loops run at most a dozen iterations and recursion depth stays under
twenty, so every program halts well inside the simulation step caps.
"""

from __future__ import annotations

import random
from . import ir

# drift allowance for the memory helper: |delta| <= 2 per call, <= 13 calls
_H_DRIFT = 26


class _Fn:
    """Accumulates one function as text, numbering instructions per block."""

    def __init__(self, name: str, ret_ty: str = "i8", params: str = ""):
        self.name = name
        self.ret_ty = ret_ty
        self.params = params
        self.blocks: list = []
        self.count = 0
        self.ret_iv = (0, 0)

    def block(self, label: str) -> None:
        self.blocks.append((label, [], []))

    def phi(self, text: str) -> None:
        self.blocks[-1][1].append(f"   {text}")

    def emit(self, text: str) -> None:
        _, _, instrs = self.blocks[-1]
        instrs.append(f"   {len(instrs)}: {text}")
        self.count += 1

    def render(self) -> str:
        lines = [f"define {self.ret_ty} @{self.name}({self.params}) {{"]
        for label, phis, instrs in self.blocks:
            lines.append(f"{label}:")
            lines.extend(phis)
            lines.extend(instrs)
        lines.append("}")
        return "\n".join(lines)


def _hull(a, b):
    return (min(a[0], b[0]), max(a[1], b[1]))


def _recursive_helper(rng: random.Random) -> _Fn:
    f = _Fn("f", params="i8 n")
    f.block("f_entry")
    f.emit(f"fc = icmp sle i8 n, {rng.randint(0, 2)}")
    f.emit("br i1 fc, label f_base, label f_rec")
    f.block("f_base")
    base = rng.randint(-3, 3)
    f.emit(f"ret i8 {base}")
    f.block("f_rec")
    f.emit(f"fd = add i8 n, {rng.choice([-1, -2])}")
    f.emit("fr = call i8 @f(i8 fd)")
    if rng.random() < 0.5:
        f.emit(f"fs = add i8 fr, {rng.randint(-2, 2)}")
        f.emit("ret i8 fs")
    else:
        f.emit("ret i8 fr")
    # base value plus at most 2 per level over <= 20 levels
    f.ret_iv = (base - 40, base + 40)
    return f


def _leaf_helper(rng: random.Random) -> _Fn:
    g = _Fn("g", params="i8 a")
    g.block("g_entry")
    g.emit(f"gt = add i8 a, {rng.randint(-4, 4)}")
    g.emit(f"gc = icmp slt i8 gt, {rng.randint(-2, 2)}")
    g.emit("br i1 gc, label g_lo, label g_hi")
    g.block("g_lo")
    lo = rng.randint(-6, 6)
    g.emit(f"ret i8 {lo}")
    g.block("g_hi")
    if rng.random() < 0.5:
        # args are kept in [-16, 16], so gt stays in [-20, 20]
        g.emit("ret i8 gt")
        g.ret_iv = _hull((lo, lo), (-20, 20))
    else:
        hi = rng.randint(-6, 6)
        g.emit(f"ret i8 {hi}")
        g.ret_iv = _hull((lo, lo), (hi, hi))
    return g


def _memory_helper(rng: random.Random) -> _Fn:
    h = _Fn("h", params="i8* q")
    h.block("h_entry")
    h.emit("hv = load i8* q")
    h.emit(f"hd = add i8 hv, {rng.choice([-2, -1, 1, 2])}")
    h.emit("store i8 hd, i8* q")
    h.emit("ret i8 hv")
    h.ret_iv = (-5 - _H_DRIFT, 5 + _H_DRIFT)
    return h


def random_program_text(seed: int, max_instrs: int = 40) -> str:
    rng = random.Random(seed)
    helper = None
    r = rng.random()
    if r < 0.25:
        helper = _recursive_helper(rng)
    elif r < 0.45:
        helper = _leaf_helper(rng)
    elif r < 0.60:
        helper = _memory_helper(rng)

    m = _Fn("main")
    budget = max_instrs - (helper.count if helper else 0)
    regs: dict = {}  # entry-defined register -> interval
    cells: list = []  # (name, "stack" | "heap")
    cell_iv: dict = {}
    fresh = iter(range(10_000))

    m.block("m_entry")
    for k in range(rng.randint(0, 2)):
        name = f"s{k}"
        if rng.random() < 0.5:
            m.emit(f"{name} = alloca i8")
            cells.append((name, "stack"))
        else:
            m.emit(f"{name} = call i8* @malloc(i64 1)")
            cells.append((name, "heap"))
        init = rng.randint(-5, 5)
        m.emit(f"store i8 {init}, i8* {name}")
        cell_iv[name] = (init, init)
    if rng.random() < 0.6:
        m.emit("nd0 = call i8 @nondet_int()")
        regs["nd0"] = (-8, 8)

    def safe_args(avail: dict):
        """Call arguments kept inside [-16, 16]."""
        pool = [str(rng.randint(-5, 9))]
        pool += [n for n, iv in avail.items() if -16 <= iv[0] and iv[1] <= 16]
        return pool

    def body_ops(avail: dict, in_loop: bool, n: int) -> None:
        """Straight-line ops; avail maps usable registers to intervals."""
        for _ in range(n):
            if m.count >= budget - 4:
                break
            kind = rng.random()
            k = next(fresh)
            if kind < 0.35 and avail:
                src = rng.choice(sorted(avail))
                op = rng.choice(["add", "sub", "mul"])
                lit = rng.randint(-2, 2) if op == "mul" else rng.randint(-4, 4)
                lo, hi = avail[src]
                if op == "mul" and max(abs(lo), abs(hi)) > 30:
                    op, lit = "add", 1
                pts = [lo + lit, hi + lit] if op == "add" else (
                    [lo - lit, hi - lit] if op == "sub" else
                    [lo * lit, hi * lit])
                avail[f"x{k}"] = (min(pts), max(pts))
                m.emit(f"x{k} = {op} i8 {src}, {lit}")
            elif kind < 0.55 and cells:
                cell = rng.choice(cells)[0]
                avail[f"l{k}"] = cell_iv[cell]
                m.emit(f"l{k} = load i8* {cell}")
            elif kind < 0.75 and cells:
                cell = rng.choice(cells)[0]
                if in_loop:
                    # loops amplify store/load feedback, so only values with a
                    # fixed iteration-independent range land in memory here
                    names = [n for n, iv in avail.items()
                             if n.startswith(("nd", "z", "i")) and -8 <= iv[0] and iv[1] <= 9]
                else:
                    names = [n for n, iv in avail.items() if -100 <= iv[0] and iv[1] <= 100]
                val = rng.choice([str(rng.randint(-20, 20))] + names)
                iv = avail.get(val) or (int(val), int(val))
                cell_iv[cell] = _hull(cell_iv[cell], iv)
                m.emit(f"store i8 {val}, i8* {cell}")
            elif helper is not None and m.count < budget - 5:
                if helper.name == "h":
                    if not cells:
                        continue
                    cell = rng.choice(cells)[0]
                    cell_iv[cell] = _hull(cell_iv[cell],
                                          (cell_iv[cell][0] - _H_DRIFT,
                                           cell_iv[cell][1] + _H_DRIFT))
                    m.emit(f"r{k} = call i8 @h(i8* {cell})")
                else:
                    arg = rng.choice(safe_args(avail))
                    m.emit(f"r{k} = call i8 @{helper.name}(i8 {arg})")
                avail[f"r{k}"] = helper.ret_iv
            elif rng.random() < 0.5:
                m.emit(f"z{k} = call i8 @nondet_int()")
                avail[f"z{k}"] = (-8, 8)

    shape = rng.random()
    if shape < 0.70 and budget - m.count >= 10:
        starts = [str(rng.randint(1, 9))] + [n for n in regs if n == "nd0"]
        start = rng.choice(starts)
        m.emit("br label m_loop")
        m.block("m_loop")
        m.phi(f"i = phi i8 [{start}, m_entry], [inext, m_body]")
        m.emit("lc = icmp sgt i8 i, 0")
        m.emit("br i1 lc, label m_body, label m_done")
        m.block("m_body")
        avail = dict(regs)
        avail["i"] = (0, 9)
        body_ops(avail, True, rng.randint(1, 4))
        m.emit("inext = add i8 i, -1")
        m.emit("br label m_loop")
        m.block("m_done")
        tail = dict(regs)
        tail["i"] = (-8, 9)
    elif shape < 0.85:
        cond_src = rng.choice(sorted(regs)) if regs else str(rng.randint(-3, 3))
        m.emit(f"dc = icmp sge i8 {cond_src}, {rng.randint(-2, 3)}")
        m.emit("br i1 dc, label m_then, label m_else")
        m.block("m_then")
        body_ops(dict(regs), False, rng.randint(1, 2))
        m.emit("br label m_join")
        m.block("m_else")
        body_ops(dict(regs), False, rng.randint(1, 2))
        m.emit("br label m_join")
        m.block("m_join")
        tail = dict(regs)
    else:
        body_ops(regs, False, rng.randint(1, 4))
        tail = regs
        m.emit("br label m_done")
        m.block("m_done")

    body_ops(tail, False, rng.randint(0, 2))
    for name, kind in cells:
        if kind == "heap" and rng.random() < 0.7:
            m.emit(f"call void @free(i8* {name})")
    rets = [str(rng.randint(-9, 9))] + sorted(tail)
    m.emit(f"ret i8 {rng.choice(rets)}")

    parts = ([helper.render()] if helper else []) + [m.render()]
    return "\n\n".join(parts) + "\n"


def random_program(seed: int, max_instrs: int = 40) -> ir.Program:
    return ir.parse(random_program_text(seed, max_instrs))


def branchy_program_text(seed: int, target_instrs: int = 3000, helpers: int = 3) -> str:
    """A long chain of two-way diamonds with occasional helper calls.

    Every diamond branches on a fresh nondeterministic value, so without
    merging the graph doubles per diamond; the join blocks give merge
    heuristics a single position to collapse them at.  No memory is
    touched and the chain is acyclic.
    """
    rng = random.Random(seed)
    parts = []
    for j in range(helpers):
        u = _Fn(f"u{j}", params="i8 a")
        u.block(f"u{j}_entry")
        u.emit(f"u{j}t = add i8 a, {rng.randint(-3, 3)}")
        u.emit(f"u{j}s = mul i8 u{j}t, {rng.choice([-1, 1, 2])}")
        u.emit(f"ret i8 u{j}s")
        parts.append(u.render())

    m = _Fn("main")
    m.block("d0_top")
    m.emit("v0 = add i8 0, 0")
    # arms define no registers of their own, so both reach the join with the
    # same variable domain and states there are mergeable; the phi still
    # routes a different value per arm
    fixed = 6  # per-diamond instructions, phi included
    count = sum(3 for _ in range(helpers)) + 2
    diamonds = max(1, (target_instrs - count) // fixed + 1)
    stride = max(1, diamonds // (8 * helpers) if helpers else diamonds)
    for k in range(diamonds):
        if k % stride == stride - 1 and helpers:
            m.emit(f"hr{k} = call i8 @u{k % helpers}(i8 {rng.randint(-4, 4)})")
        m.emit(f"c{k} = call i8 @nondet_int()")
        m.emit(f"t{k} = icmp sgt i8 c{k}, {rng.randint(-1, 1)}")
        m.emit(f"br i1 t{k}, label d{k}_a, label d{k}_b")
        m.block(f"d{k}_a")
        m.emit(f"br label d{k + 1}_top")
        m.block(f"d{k}_b")
        m.emit(f"br label d{k + 1}_top")
        m.block(f"d{k + 1}_top")
        m.phi(f"v{k + 1} = phi i8 [c{k}, d{k}_a], [v{k}, d{k}_b]")
    m.emit(f"ret i8 v{diamonds}")
    parts.append(m.render())
    return "\n\n".join(parts) + "\n"


def branchy_program(seed: int, target_instrs: int = 3000, helpers: int = 3) -> ir.Program:
    return ir.parse(branchy_program_text(seed, target_instrs, helpers))
