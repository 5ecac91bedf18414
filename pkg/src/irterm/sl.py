"""Separation logic layer for memory-aware state formulas.

Formulas here extend the first-order fragment in `logic` with heap atoms:
single-byte cells (addr holds value), typed multi-byte cells (little-endian
two's complement), allocation clauses (every address in an interval is
allocated) and the separating conjunction.  They are evaluated against an
interpretation (as, mem): `as` assigns integers to frame-indexed program
variables, `mem` is a partial map from positive addresses to unsigned bytes.

Free symbolic variables must be closed by an instantiation before checking;
the only quantifiers evaluated here are the explicit SLForall/SLExists nodes,
whose ranges are derived finitely from mem's domain and the formula itself.
Allocation clauses are checked directly as interval coverage, which matches
their quantified reading exactly and avoids splitting the heap cell by cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .logic import And, BinTerm, Cmp, Formula, Implies, Not, Or, SymVar, Term


@dataclass(frozen=True)
class PVar:
    """A program variable tagged with its stack frame index (1 = top frame)."""

    name: str
    frame: int

    def __repr__(self) -> str:
        return f"{self.name}@{self.frame}"


SLTerm = Union[int, SymVar, PVar, BinTerm]


@dataclass(frozen=True)
class SLPure:
    """An embedded first-order formula; terms may mention PVar leaves."""

    phi: Formula


@dataclass(frozen=True)
class SLCell:
    """addr holds value, as one unsigned byte: mem(addr) = value."""

    addr: SLTerm
    value: SLTerm


@dataclass(frozen=True)
class SLBytes:
    """addr holds value as `size` little-endian bytes of its two's complement."""

    addr: SLTerm
    value: SLTerm
    size: int


@dataclass(frozen=True)
class SLAlloc:
    """Every address in [lo, hi] is allocated (empty interval holds trivially)."""

    lo: SLTerm
    hi: SLTerm


@dataclass(frozen=True)
class SLAnd:
    parts: tuple


@dataclass(frozen=True)
class SLSep:
    """Separating conjunction: the heap splits into disjoint models of the parts."""

    parts: tuple


@dataclass(frozen=True)
class SLNot:
    body: "SLFormula"


@dataclass(frozen=True)
class SLForall:
    var: SymVar
    body: "SLFormula"


@dataclass(frozen=True)
class SLExists:
    var: SymVar
    body: "SLFormula"


SLFormula = Union[SLPure, SLCell, SLBytes, SLAlloc, SLAnd, SLSep, SLNot, SLForall, SLExists]

SEP_SPLIT_LIMIT = 12


def sl_and(*parts) -> SLAnd:
    flat = []
    for p in parts:
        if isinstance(p, SLAnd):
            flat.extend(p.parts)
        else:
            flat.append(p)
    return SLAnd(tuple(flat))


class SlEvalError(Exception):
    pass


def _eval_term(t: SLTerm, env: dict) -> int:
    if isinstance(t, int):
        return t
    if isinstance(t, (SymVar, PVar)):
        try:
            return env[t]
        except KeyError:
            raise SlEvalError(f"unbound variable {t!r}")
    if isinstance(t, BinTerm):
        a = _eval_term(t.lhs, env)
        b = _eval_term(t.rhs, env)
        if t.op == "+":
            return a + b
        if t.op == "-":
            return a - b
        if t.op == "*":
            return a * b
        raise SlEvalError(f"unknown operator {t.op!r}")
    raise SlEvalError(f"not a term: {t!r}")


_CMPS = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _eval_pure(phi: Formula, env: dict) -> bool:
    if isinstance(phi, Cmp):
        return _CMPS[phi.op](_eval_term(phi.lhs, env), _eval_term(phi.rhs, env))
    if isinstance(phi, Not):
        return not _eval_pure(phi.arg, env)
    if isinstance(phi, And):
        return all(_eval_pure(p, env) for p in phi.args)
    if isinstance(phi, Or):
        return any(_eval_pure(p, env) for p in phi.args)
    if isinstance(phi, Implies):
        return (not _eval_pure(phi.lhs, env)) or _eval_pure(phi.rhs, env)
    raise SlEvalError(f"not a formula: {phi!r}")


def encode_bytes(value: int, size: int) -> list:
    """Little-endian unsigned bytes of `value` in two's complement at `size` bytes."""
    v3 = value % (1 << (8 * size))
    return [(v3 >> (8 * k)) & 0xFF for k in range(size)]


def decode_bytes(bs: list) -> int:
    """Signed integer from little-endian bytes (inverse of encode_bytes)."""
    size = len(bs)
    v = 0
    for k, b in enumerate(bs):
        if not 0 <= b <= 255:
            raise ValueError(f"byte out of range: {b}")
        v |= b << (8 * k)
    if v >= 1 << (8 * size - 1):
        v -= 1 << (8 * size)
    return v


def _term_values(phi: SLFormula, var: SymVar, env: dict) -> set:
    """Values of var-free terms compared against quantified variables; seeds ranges."""
    out: set[int] = set()

    def scan_term(t: SLTerm):
        try:
            out.add(_eval_term(t, env))
        except SlEvalError:
            pass

    def scan_pure(p: Formula):
        if isinstance(p, Cmp):
            scan_term(p.lhs), scan_term(p.rhs)
        elif isinstance(p, Not):
            scan_pure(p.arg)
        elif isinstance(p, (And, Or)):
            for q in p.args:
                scan_pure(q)
        elif isinstance(p, Implies):
            scan_pure(p.lhs), scan_pure(p.rhs)

    def scan(f: SLFormula):
        if isinstance(f, SLPure):
            scan_pure(f.phi)
        elif isinstance(f, SLCell):
            scan_term(f.addr), scan_term(f.value)
        elif isinstance(f, SLBytes):
            scan_term(f.addr), scan_term(f.value)
        elif isinstance(f, SLAlloc):
            scan_term(f.lo), scan_term(f.hi)
        elif isinstance(f, (SLAnd, SLSep)):
            for q in f.parts:
                scan(q)
        elif isinstance(f, SLNot):
            scan(f.body)
        elif isinstance(f, (SLForall, SLExists)):
            scan(f.body)

    scan(phi)
    return out


def _used_as_address(phi: SLFormula, var: SymVar) -> bool:
    def mentions(t: SLTerm) -> bool:
        if isinstance(t, SymVar):
            return t == var
        if isinstance(t, BinTerm):
            return mentions(t.lhs) or mentions(t.rhs)
        return False

    if isinstance(phi, (SLCell, SLBytes)):
        return mentions(phi.addr)
    if isinstance(phi, SLAlloc):
        return mentions(phi.lo) or mentions(phi.hi)
    if isinstance(phi, (SLAnd, SLSep)):
        return any(_used_as_address(p, var) for p in phi.parts)
    if isinstance(phi, SLNot):
        return _used_as_address(phi.body, var)
    if isinstance(phi, (SLForall, SLExists)):
        return _used_as_address(phi.body, var)
    return False


def _quantifier_range(phi: SLFormula, var: SymVar, mem: dict, env: dict) -> list:
    seeds = _term_values(phi, var, env)
    if _used_as_address(phi, var):
        cand = set(mem)
        for a in list(mem) + sorted(seeds):
            cand.update((a - 1, a, a + 1))
    else:
        cand = set(range(0, 256))
        cand.update(seeds)
        for s in list(seeds):
            cand.update((s - 1, s + 1))
    return sorted(cand)


def sl_holds(mem: dict, phi: SLFormula, env: Optional[dict] = None) -> bool:
    """Checks mem |= phi under env (a closing assignment for SymVar/PVar leaves)."""
    env = env or {}

    if isinstance(phi, SLPure):
        return _eval_pure(phi.phi, env)
    if isinstance(phi, SLCell):
        return mem.get(_eval_term(phi.addr, env)) == _eval_term(phi.value, env)
    if isinstance(phi, SLBytes):
        addr = _eval_term(phi.addr, env)
        for k, byte in enumerate(encode_bytes(_eval_term(phi.value, env), phi.size)):
            if mem.get(addr + k) != byte:
                return False
        return True
    if isinstance(phi, SLAlloc):
        lo = _eval_term(phi.lo, env)
        hi = _eval_term(phi.hi, env)
        return all(a in mem for a in range(lo, hi + 1))
    if isinstance(phi, SLAnd):
        return all(sl_holds(mem, p, env) for p in phi.parts)
    if isinstance(phi, SLNot):
        return not sl_holds(mem, phi.body, env)
    if isinstance(phi, SLForall):
        return all(
            sl_holds(mem, phi.body, {**env, phi.var: n})
            for n in _quantifier_range(phi.body, phi.var, mem, env)
        )
    if isinstance(phi, SLExists):
        return any(
            sl_holds(mem, phi.body, {**env, phi.var: n})
            for n in _quantifier_range(phi.body, phi.var, mem, env)
        )
    if isinstance(phi, SLSep):
        return _sep_holds(mem, list(phi.parts), env)
    raise SlEvalError(f"not an SL formula: {phi!r}")


def _sep_holds(mem: dict, parts: list, env: dict) -> bool:
    if not parts:
        return True
    if all(isinstance(p, SLAlloc) for p in parts):
        # each clause claims exactly its interval; a split exists iff the
        # intervals are pairwise disjoint and each lies inside mem's domain
        intervals = []
        for p in parts:
            lo = _eval_term(p.lo, env)
            hi = _eval_term(p.hi, env)
            if lo > hi:
                continue
            if any(a not in mem for a in range(lo, hi + 1)):
                return False
            intervals.append((lo, hi))
        intervals.sort()
        for (l1, h1), (l2, h2) in zip(intervals, intervals[1:]):
            if l2 <= h1:
                return False
        return True
    if len(mem) > SEP_SPLIT_LIMIT:
        raise SlEvalError(f"separating split over {len(mem)} cells exceeds the limit")
    first, rest = parts[0], parts[1:]
    addrs = sorted(mem)
    for mask in range(1 << len(addrs)):
        mem1 = {a: mem[a] for i, a in enumerate(addrs) if mask >> i & 1}
        mem2 = {a: mem[a] for i, a in enumerate(addrs) if not mask >> i & 1}
        if sl_holds(mem1, first, env) and _sep_holds(mem2, rest, env):
            return True
    return False


def render_sl(phi: SLFormula) -> str:
    def rt(t: SLTerm) -> str:
        if isinstance(t, (int, PVar)):
            return repr(t) if isinstance(t, PVar) else str(t)
        if isinstance(t, SymVar):
            return repr(t)
        return f"({rt(t.lhs)} {t.op} {rt(t.rhs)})"

    def rp(p: Formula) -> str:
        if isinstance(p, Cmp):
            return f"{rt(p.lhs)} {p.op} {rt(p.rhs)}"
        if isinstance(p, Not):
            return f"not({rp(p.arg)})"
        if isinstance(p, And):
            return "true" if not p.args else "and(" + ", ".join(rp(a) for a in p.args) + ")"
        if isinstance(p, Or):
            return "false" if not p.args else "or(" + ", ".join(rp(a) for a in p.args) + ")"
        if isinstance(p, Implies):
            return f"({rp(p.lhs)} => {rp(p.rhs)})"
        raise SlEvalError(f"not a formula: {p!r}")

    if isinstance(phi, SLPure):
        return rp(phi.phi)
    if isinstance(phi, SLCell):
        return f"({rt(phi.addr)} -> {rt(phi.value)})"
    if isinstance(phi, SLBytes):
        return f"({rt(phi.addr)} ->[{phi.size}] {rt(phi.value)})"
    if isinstance(phi, SLAlloc):
        return f"alloc({rt(phi.lo)}, {rt(phi.hi)})"
    if isinstance(phi, SLAnd):
        return "(" + " /\\ ".join(render_sl(p) for p in phi.parts) + ")" if phi.parts else "true"
    if isinstance(phi, SLSep):
        return "(" + " * ".join(render_sl(p) for p in phi.parts) + ")" if phi.parts else "true"
    if isinstance(phi, SLNot):
        return f"!{render_sl(phi.body)}"
    if isinstance(phi, SLForall):
        return f"(forall {rt(phi.var)}. {render_sl(phi.body)})"
    if isinstance(phi, SLExists):
        return f"(exists {rt(phi.var)}. {render_sl(phi.body)})"
    raise SlEvalError(f"not an SL formula: {phi!r}")
