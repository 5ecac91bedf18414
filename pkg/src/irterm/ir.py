"""A small LLVM-like intermediate representation.

Types are iN for N in {1, 8, 16, 32, 64} plus pointers (nesting depth at
most 4); pointers occupy 8 bytes.  Instructions: add/sub/mul, icmp
(eq, ne, slt, sle, sgt, sge), br (conditional and unconditional, with
phi-resolution bindings attached per edge), load, store, alloca, call and
ret.  malloc, free and nondet_int are intrinsics invoked through call.

Phi nodes appear in the surface syntax at block starts but are not
first-class positions: the parser folds them into the incoming branch
edges, so a block's position indices cover only its non-phi instructions.
`N:` index prefixes and `%` sigils are accepted and ignored.  Comments
start with `;`.

Program positions are (block name, instruction index) pairs; block names
are globally unique across functions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

INT_WIDTHS = (1, 8, 16, 32, 64)
MAX_PTR_DEPTH = 4
PTR_SIZE = 8

INTRINSICS = ("malloc", "free", "nondet_int")


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class IrType:
    """An integer type (width in bits) or a pointer to another type."""

    kind: str  # 'int' | 'ptr'
    width: int = 0
    pointee: Optional["IrType"] = None

    def __repr__(self) -> str:
        if self.kind == "int":
            return f"i{self.width}"
        return f"{self.pointee!r}*"


def int_type(width: int) -> IrType:
    if width not in INT_WIDTHS:
        raise ValueError(f"unsupported integer width i{width}")
    return IrType("int", width)


def ptr_type(pointee: IrType) -> IrType:
    if ptr_depth(pointee) + 1 > MAX_PTR_DEPTH:
        raise ValueError("pointer nesting too deep")
    return IrType("ptr", pointee=pointee)


def ptr_depth(ty: IrType) -> int:
    return 0 if ty.kind == "int" else 1 + ptr_depth(ty.pointee)


def size_of(ty: IrType) -> int:
    """Byte size: integers round up to whole bytes, pointers are 8 bytes."""
    if ty.kind == "ptr":
        return PTR_SIZE
    return (ty.width + 7) // 8


def parse_type(text: str, line: int = 0) -> IrType:
    text = text.strip()
    stars = 0
    while text.endswith("*"):
        stars += 1
        text = text[:-1].strip()
    m = re.fullmatch(r"i(\d+)", text)
    if not m:
        raise ParseError(f"bad type {text!r}", line)
    width = int(m.group(1))
    if width not in INT_WIDTHS:
        raise ParseError(f"unsupported integer width i{width}", line)
    if stars > MAX_PTR_DEPTH:
        raise ParseError("pointer nesting too deep", line)
    ty = int_type(width)
    for _ in range(stars):
        ty = IrType("ptr", pointee=ty)
    return ty


# ---------------------------------------------------------------------------
# instructions

Operand = Union[str, int]  # program variable name or integer literal

ICMP_PREDS = ("eq", "ne", "slt", "sle", "sgt", "sge")


@dataclass(frozen=True)
class Arith:
    op: str  # 'add' | 'sub' | 'mul'
    dest: str
    ty: IrType
    a: Operand
    b: Operand


@dataclass(frozen=True)
class Icmp:
    dest: str
    pred: str
    ty: IrType
    a: Operand
    b: Operand


@dataclass(frozen=True)
class PhiBinding:
    dest: str
    ty: IrType
    value: Operand


@dataclass(frozen=True)
class Br:
    cond: Optional[str]  # i1 variable, None for unconditional
    then_block: str
    else_block: Optional[str]
    then_bindings: tuple = ()  # tuple[PhiBinding]
    else_bindings: tuple = ()


@dataclass(frozen=True)
class Load:
    dest: str
    ty: IrType  # loaded value type
    addr: str


@dataclass(frozen=True)
class Store:
    ty: IrType
    value: Operand
    addr: str


@dataclass(frozen=True)
class Alloca:
    dest: str
    ty: IrType
    count: int = 1


@dataclass(frozen=True)
class Call:
    dest: Optional[str]
    ty: Optional[IrType]  # None for void
    callee: str
    args: tuple = ()  # tuple[tuple[IrType, Operand]]


@dataclass(frozen=True)
class Ret:
    ty: Optional[IrType]  # None for void
    value: Optional[Operand] = None


Instruction = Union[Arith, Icmp, Br, Load, Store, Alloca, Call, Ret]


@dataclass(frozen=True)
class Phi:
    dest: str
    ty: IrType
    incomings: tuple  # tuple[tuple[Operand, str]] (value, predecessor block)


@dataclass(frozen=True)
class Block:
    name: str
    phis: tuple  # tuple[Phi]
    instrs: tuple  # tuple[Instruction]


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple  # tuple[tuple[str, IrType]]
    ret_ty: Optional[IrType]
    blocks: tuple  # tuple[Block]

    @property
    def entry_block(self) -> str:
        return self.blocks[0].name


Position = tuple  # (block name, instruction index)


@dataclass
class Program:
    functions: dict  # name -> Function, insertion-ordered

    def __post_init__(self):
        self._blocks: dict[str, tuple[str, Block]] = {}
        for fname, fn in self.functions.items():
            for b in fn.blocks:
                self._blocks[b.name] = (fname, b)

    def function(self, name: str) -> Function:
        return self.functions[name]

    def block(self, name: str) -> Block:
        return self._blocks[name][1]

    def func_of_block(self, name: str) -> str:
        return self._blocks[name][0]

    def instruction_at(self, pos: Position) -> Instruction:
        block, idx = pos
        return self._blocks[block][1].instrs[idx]

    def initial_position(self, fname: str) -> Position:
        return (self.functions[fname].entry_block, 0)

    def is_initial(self, pos: Position) -> bool:
        block, idx = pos
        fname = self.func_of_block(block)
        return idx == 0 and block == self.functions[fname].entry_block

    def advance(self, pos: Position) -> Position:
        return (pos[0], pos[1] + 1)

    def instruction_count(self) -> int:
        return sum(len(b.instrs) + len(b.phis) for f in self.functions.values() for b in f.blocks)


# ---------------------------------------------------------------------------
# parsing

_IDENT = r"[A-Za-z_.][A-Za-z0-9_.\-]*"


def _strip(line: str) -> str:
    if ";" in line:
        line = line[: line.index(";")]
    return line.strip()


def _clean_var(tok: str, line: int) -> str:
    tok = tok.strip()
    if tok.startswith("%"):
        tok = tok[1:]
    if not re.fullmatch(_IDENT, tok):
        raise ParseError(f"bad variable name {tok!r}", line)
    return tok


def _operand(tok: str, line: int) -> Operand:
    tok = tok.strip()
    if re.fullmatch(r"-?\d+", tok):
        return int(tok)
    return _clean_var(tok, line)


def _split_args(text: str) -> list:
    """Split on top-level commas (no nesting in this grammar beyond brackets)."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur)
    return [p.strip() for p in parts]


def _parse_typed_operand(text: str, line: int) -> tuple[IrType, Operand]:
    parts = text.strip().rsplit(None, 1)
    if len(parts) != 2:
        raise ParseError(f"expected 'type operand', got {text!r}", line)
    return parse_type(parts[0], line), _operand(parts[1], line)


def _parse_instruction(line_text: str, lineno: int):
    """Parse one instruction line; returns an Instruction or a Phi."""
    text = line_text
    m = re.match(r"^(?:\d+\s*:\s*)?(.*)$", text)
    text = m.group(1).strip()

    dest = None
    m = re.match(rf"^%?({_IDENT})\s*=\s*(.*)$", text)
    if m and not text.startswith(("br ", "store ", "ret ", "call ")):
        dest = m.group(1)
        text = m.group(2).strip()

    op = text.split(None, 1)[0] if text else ""
    rest = text[len(op) :].strip()

    if op in ("add", "sub", "mul"):
        if dest is None:
            raise ParseError(f"{op} needs a destination", lineno)
        parts = _split_args(rest)
        if len(parts) != 2:
            raise ParseError(f"{op} expects two operands", lineno)
        ty_and_a = parts[0].rsplit(None, 1)
        if len(ty_and_a) != 2:
            raise ParseError(f"{op} expects 'ty a, b'", lineno)
        ty = parse_type(ty_and_a[0], lineno)
        return Arith(op, dest, ty, _operand(ty_and_a[1], lineno), _operand(parts[1], lineno))

    if op == "icmp":
        if dest is None:
            raise ParseError("icmp needs a destination", lineno)
        m = re.match(rf"^({'|'.join(ICMP_PREDS)})\s+(.*)$", rest)
        if not m:
            raise ParseError(f"bad icmp predicate in {rest!r}", lineno)
        pred, rest2 = m.group(1), m.group(2)
        parts = _split_args(rest2)
        if len(parts) != 2:
            raise ParseError("icmp expects two operands", lineno)
        ty_and_a = parts[0].rsplit(None, 1)
        if len(ty_and_a) != 2:
            raise ParseError("icmp expects 'pred ty a, b'", lineno)
        ty = parse_type(ty_and_a[0], lineno)
        return Icmp(dest, pred, ty, _operand(ty_and_a[1], lineno), _operand(parts[1], lineno))

    if op == "phi":
        if dest is None:
            raise ParseError("phi needs a destination", lineno)
        m = re.match(r"^(\S+)\s+(.*)$", rest)
        if not m:
            raise ParseError("phi expects a type", lineno)
        ty = parse_type(m.group(1), lineno)
        incomings = []
        for part in _split_args(m.group(2)):
            pm = re.fullmatch(r"\[\s*([^,\]]+)\s*,\s*%?(" + _IDENT + r")\s*\]", part)
            if not pm:
                raise ParseError(f"bad phi incoming {part!r}", lineno)
            incomings.append((_operand(pm.group(1), lineno), pm.group(2)))
        if not incomings:
            raise ParseError("phi needs at least one incoming", lineno)
        return Phi(dest, ty, tuple(incomings))

    if op == "br":
        if dest is not None:
            raise ParseError("br has no destination", lineno)
        m = re.fullmatch(rf"label\s+%?({_IDENT})", rest)
        if m:
            return Br(None, m.group(1), None)
        m = re.fullmatch(
            rf"i1\s+%?({_IDENT})\s*,\s*label\s+%?({_IDENT})\s*,\s*label\s+%?({_IDENT})", rest
        )
        if m:
            return Br(m.group(1), m.group(2), m.group(3))
        raise ParseError(f"bad br {rest!r}", lineno)

    if op == "load":
        if dest is None:
            raise ParseError("load needs a destination", lineno)
        m = re.fullmatch(r"(\S+)\s+%?(" + _IDENT + r")", rest)
        if not m:
            raise ParseError(f"bad load {rest!r}", lineno)
        ptr_ty = parse_type(m.group(1), lineno)
        if ptr_ty.kind != "ptr":
            raise ParseError("load address type must be a pointer", lineno)
        return Load(dest, ptr_ty.pointee, m.group(2))

    if op == "store":
        if dest is not None:
            raise ParseError("store has no destination", lineno)
        parts = _split_args(rest)
        if len(parts) != 2:
            raise ParseError("store expects 'ty value, ty* addr'", lineno)
        ty, value = _parse_typed_operand(parts[0], lineno)
        ptr_ty, addr = _parse_typed_operand(parts[1], lineno)
        if ptr_ty.kind != "ptr" or ptr_ty.pointee != ty or not isinstance(addr, str):
            raise ParseError("store address must be a pointer to the stored type", lineno)
        return Store(ty, value, addr)

    if op == "alloca":
        if dest is None:
            raise ParseError("alloca needs a destination", lineno)
        parts = _split_args(rest)
        ty = parse_type(parts[0], lineno)
        count = 1
        if len(parts) == 2:
            if not re.fullmatch(r"\d+", parts[1]):
                raise ParseError("alloca count must be a positive literal", lineno)
            count = int(parts[1])
            if count <= 0:
                raise ParseError("alloca count must be positive", lineno)
        elif len(parts) > 2:
            raise ParseError("bad alloca", lineno)
        return Alloca(dest, ty, count)

    if op == "call":
        m = re.fullmatch(r"(\S+)\s+@(" + _IDENT + r")\s*\((.*)\)", rest, re.S)
        if not m:
            raise ParseError(f"bad call {rest!r}", lineno)
        ty_text, callee, args_text = m.groups()
        ty = None if ty_text == "void" else parse_type(ty_text, lineno)
        if ty is None and dest is not None:
            raise ParseError("void call cannot have a destination", lineno)
        args = tuple(_parse_typed_operand(a, lineno) for a in _split_args(args_text))
        return Call(dest, ty, callee, args)

    if op == "ret":
        if dest is not None:
            raise ParseError("ret has no destination", lineno)
        if rest == "void":
            return Ret(None, None)
        ty_text, _, val_text = rest.partition(" ")
        if not val_text:
            raise ParseError("ret expects 'ty value' or 'void'", lineno)
        return Ret(parse_type(ty_text, lineno), _operand(val_text, lineno))

    raise ParseError(f"unknown instruction {text!r}", lineno)


def parse(text: str) -> Program:
    """Parse IR text into a Program; raises ParseError with a line number."""
    lines = text.splitlines()
    functions: dict[str, Function] = {}
    i = 0
    n = len(lines)

    def peek() -> Optional[str]:
        return _strip(lines[i]) if i < n else None

    saw_any = False
    while i < n:
        raw = _strip(lines[i])
        if not raw:
            i += 1
            continue
        m = re.match(rf"^define\s+(\S+)\s+@({_IDENT})\s*\((.*)\)\s*\{{?\s*$", raw)
        if not m:
            raise ParseError(f"expected function definition, got {raw!r}", i + 1)
        saw_any = True
        ret_text, fname, params_text = m.groups()
        if fname in functions:
            raise ParseError(f"duplicate function @{fname}", i + 1)
        ret_ty = None if ret_text == "void" else parse_type(ret_text, i + 1)
        params = []
        if params_text.strip():
            for p in _split_args(params_text):
                parts = p.rsplit(None, 1)
                if len(parts) != 2:
                    raise ParseError(f"bad parameter {p!r}", i + 1)
                params.append((_clean_var(parts[1], i + 1), parse_type(parts[0], i + 1)))
        if not raw.endswith("{"):
            i += 1
            while peek() == "":
                i += 1
            if peek() != "{":
                raise ParseError("expected '{' after function header", i + 1)
        i += 1

        blocks: list[tuple[str, list]] = []
        closed = False
        while i < n:
            raw = _strip(lines[i])
            if not raw:
                i += 1
                continue
            body = raw
            if body.endswith("}"):
                body = body[:-1].strip()
                closed = True
            if body:
                bm = re.fullmatch(rf"({_IDENT})\s*:", body)
                if bm:
                    blocks.append((bm.group(1), []))
                else:
                    if not blocks:
                        raise ParseError("instruction outside a block", i + 1)
                    blocks[-1][1].append((i + 1, _parse_instruction(body, i + 1)))
            i += 1
            if closed:
                break
        if not closed:
            raise ParseError(f"function @{fname} is missing '}}'", i)
        if not blocks:
            raise ParseError(f"function @{fname} has no blocks", i)

        built = []
        for bname, items in blocks:
            phis = []
            instrs = []
            for lineno, ins in items:
                if isinstance(ins, Phi):
                    if instrs:
                        raise ParseError("phi must precede the block's instructions", lineno)
                    phis.append(ins)
                else:
                    instrs.append(ins)
            if not instrs:
                raise ParseError(f"block {bname} has no instructions", i)
            built.append(Block(bname, tuple(phis), tuple(instrs)))
        functions[fname] = Function(fname, tuple(params), ret_ty, tuple(built))

    if not saw_any:
        raise ParseError("no functions found", 1)

    # global block-name uniqueness, then phi folding into branch edges
    seen: dict[str, str] = {}
    for fname, fn in functions.items():
        for b in fn.blocks:
            if b.name in seen:
                raise ParseError(f"duplicate block name {b.name}")
            seen[b.name] = fname

    # single assignment per register within a function
    for fname, fn in functions.items():
        defined = {p for p, _ in fn.params}
        for b in fn.blocks:
            for ins in list(b.phis) + list(b.instrs):
                dest = getattr(ins, "dest", None)
                if dest is None:
                    continue
                if dest in defined:
                    raise ParseError(f"register {dest} defined twice in @{fname}")
                defined.add(dest)

    block_map = {b.name: b for fn in functions.values() for b in fn.blocks}

    def bindings_for(target: str, source: str, lineno: int = 0) -> tuple:
        tb = block_map.get(target)
        if tb is None:
            raise ParseError(f"branch to unknown block {target}")
        out = []
        for phi in tb.phis:
            inc = {pred: val for val, pred in phi.incomings}
            if source not in inc:
                raise ParseError(f"phi {phi.dest} in {target} has no incoming for {source}")
            out.append(PhiBinding(phi.dest, phi.ty, inc[source]))
        return tuple(out)

    folded: dict[str, Function] = {}
    for fname, fn in functions.items():
        new_blocks = []
        for b in fn.blocks:
            new_instrs = []
            for ins in b.instrs:
                if isinstance(ins, Br):
                    ins = Br(
                        ins.cond,
                        ins.then_block,
                        ins.else_block,
                        bindings_for(ins.then_block, b.name),
                        bindings_for(ins.else_block, b.name) if ins.else_block else (),
                    )
                new_instrs.append(ins)
            new_blocks.append(Block(b.name, b.phis, tuple(new_instrs)))
        folded[fname] = Function(fn.name, fn.params, fn.ret_ty, tuple(new_blocks))

    return Program(folded)


# ---------------------------------------------------------------------------
# printing


def _fmt_operand(op: Operand) -> str:
    return str(op)


def format_program(p: Program) -> str:
    out = []
    for fn in p.functions.values():
        params = ", ".join(f"{ty!r} {name}" for name, ty in fn.params)
        ret = repr(fn.ret_ty) if fn.ret_ty else "void"
        out.append(f"define {ret} @{fn.name}({params}) {{")
        for b in fn.blocks:
            out.append(f"{b.name}:")
            for phi in b.phis:
                inc = ", ".join(f"[{_fmt_operand(v)}, {pred}]" for v, pred in phi.incomings)
                out.append(f"  {phi.dest} = phi {phi.ty!r} {inc}")
            for idx, ins in enumerate(b.instrs):
                out.append(f"  {idx}: {_fmt_instr(ins)}")
        out.append("}")
        out.append("")
    return "\n".join(out)


def _fmt_instr(ins: Instruction) -> str:
    if isinstance(ins, Arith):
        return f"{ins.dest} = {ins.op} {ins.ty!r} {_fmt_operand(ins.a)}, {_fmt_operand(ins.b)}"
    if isinstance(ins, Icmp):
        return f"{ins.dest} = icmp {ins.pred} {ins.ty!r} {_fmt_operand(ins.a)}, {_fmt_operand(ins.b)}"
    if isinstance(ins, Br):
        if ins.cond is None:
            return f"br label {ins.then_block}"
        return f"br i1 {ins.cond}, label {ins.then_block}, label {ins.else_block}"
    if isinstance(ins, Load):
        return f"{ins.dest} = load {ins.ty!r}* {ins.addr}"
    if isinstance(ins, Store):
        return f"store {ins.ty!r} {_fmt_operand(ins.value)}, {ins.ty!r}* {ins.addr}"
    if isinstance(ins, Alloca):
        if ins.count != 1:
            return f"{ins.dest} = alloca {ins.ty!r}, {ins.count}"
        return f"{ins.dest} = alloca {ins.ty!r}"
    if isinstance(ins, Call):
        args = ", ".join(f"{ty!r} {_fmt_operand(a)}" for ty, a in ins.args)
        ret = repr(ins.ty) if ins.ty else "void"
        head = f"{ins.dest} = " if ins.dest else ""
        return f"{head}call {ret} @{ins.callee}({args})"
    if isinstance(ins, Ret):
        if ins.ty is None:
            return "ret void"
        return f"ret {ins.ty!r} {_fmt_operand(ins.value)}"
    raise TypeError(f"unknown instruction {ins!r}")


# ---------------------------------------------------------------------------
# well-formedness


def _successors(b: Block) -> list:
    last = b.instrs[-1]
    if isinstance(last, Br):
        return [last.then_block] + ([last.else_block] if last.else_block else [])
    return []


def _dominators(fn: Function) -> dict:
    """Block dominators by the standard iterative dataflow."""
    names = [b.name for b in fn.blocks]
    preds: dict[str, set] = {nm: set() for nm in names}
    by_name = {b.name: b for b in fn.blocks}
    for b in fn.blocks:
        for s in _successors(b):
            if s in preds:
                preds[s].add(b.name)
    entry = fn.entry_block
    dom = {nm: set(names) for nm in names}
    dom[entry] = {entry}
    changed = True
    while changed:
        changed = False
        for nm in names:
            if nm == entry:
                continue
            ps = [dom[p] for p in preds[nm]]
            new = (set.intersection(*ps) if ps else set()) | {nm}
            if new != dom[nm]:
                dom[nm] = new
                changed = True
    return dom


def _instr_uses(ins: Instruction) -> list:
    uses = []

    def add(op):
        if isinstance(op, str):
            uses.append(op)

    if isinstance(ins, Arith) or isinstance(ins, Icmp):
        add(ins.a), add(ins.b)
    elif isinstance(ins, Br):
        if ins.cond:
            add(ins.cond)
        for pb in ins.then_bindings + ins.else_bindings:
            add(pb.value)
    elif isinstance(ins, Load):
        add(ins.addr)
    elif isinstance(ins, Store):
        add(ins.value), add(ins.addr)
    elif isinstance(ins, Call):
        for _, a in ins.args:
            add(a)
    elif isinstance(ins, Ret):
        if ins.value is not None:
            add(ins.value)
    return uses


def well_formed(p: Program) -> list:
    """Structural checks; returns a list of violation strings (empty = well-formed)."""
    errs: list[str] = []
    for fn in p.functions.values():
        defs: dict[str, tuple] = {}  # var -> (block, index); params at entry index -1
        for name, _ in fn.params:
            if name in defs:
                errs.append(f"@{fn.name}: duplicate parameter {name}")
            defs[name] = (fn.entry_block, -1)
        for b in fn.blocks:
            for phi in b.phis:
                if phi.dest in defs:
                    errs.append(f"@{fn.name}: variable {phi.dest} defined more than once")
                defs[phi.dest] = (b.name, -1)
            for idx, ins in enumerate(b.instrs):
                dest = getattr(ins, "dest", None)
                if dest:
                    if dest in defs:
                        errs.append(f"@{fn.name}: variable {dest} defined more than once")
                    defs[dest] = (b.name, idx)

        # terminators
        for b in fn.blocks:
            for idx, ins in enumerate(b.instrs):
                is_last = idx == len(b.instrs) - 1
                if isinstance(ins, (Br, Ret)) and not is_last:
                    errs.append(f"@{fn.name}/{b.name}: terminator before block end")
                if is_last and not isinstance(ins, (Br, Ret)):
                    errs.append(f"@{fn.name}/{b.name}: block does not end in br or ret")
            for s in _successors(b):
                if s not in {bb.name for bb in fn.blocks}:
                    errs.append(f"@{fn.name}/{b.name}: branch to unknown or foreign block {s}")

        # calls
        for b in fn.blocks:
            for ins in b.instrs:
                if not isinstance(ins, Call):
                    continue
                if ins.callee == "malloc":
                    if ins.ty is None or ins.ty.kind != "ptr" or len(ins.args) != 1 or ins.args[0][0].kind != "int":
                        errs.append(f"@{fn.name}: malloc must be 'ptr-type call with one integer size'")
                elif ins.callee == "free":
                    if ins.ty is not None or len(ins.args) != 1 or ins.args[0][0].kind != "ptr":
                        errs.append(f"@{fn.name}: free must be 'void call with one pointer'")
                elif ins.callee == "nondet_int":
                    if ins.ty is None or ins.ty.kind != "int" or ins.args:
                        errs.append(f"@{fn.name}: nondet_int must be a niladic integer call")
                else:
                    callee = p.functions.get(ins.callee)
                    if callee is None:
                        errs.append(f"@{fn.name}: call to unknown function @{ins.callee}")
                        continue
                    if callee.ret_ty != ins.ty:
                        errs.append(f"@{fn.name}: call to @{ins.callee} disagrees on return type")
                    if len(callee.params) != len(ins.args):
                        errs.append(f"@{fn.name}: call to @{ins.callee} has wrong arity")
                    else:
                        for (pname, pty), (aty, _) in zip(callee.params, ins.args):
                            if pty != aty:
                                errs.append(
                                    f"@{fn.name}: call to @{ins.callee} argument {pname} type mismatch"
                                )
                    if ins.ty is not None and ins.dest is None:
                        errs.append(f"@{fn.name}: value-returning call to @{ins.callee} discards its result")

        # returns agree with signature
        for b in fn.blocks:
            last = b.instrs[-1]
            if isinstance(last, Ret) and last.ty != fn.ret_ty:
                errs.append(f"@{fn.name}/{b.name}: ret type disagrees with signature")

        # dominance of uses
        dom = _dominators(fn)
        def_site = dict(defs)

        def dominates(site: tuple, block: str, idx: int) -> bool:
            dblock, didx = site
            if dblock == block:
                return didx < idx
            return dblock in dom.get(block, set())

        for b in fn.blocks:
            for idx, ins in enumerate(b.instrs):
                for use in _instr_uses(ins):
                    site = def_site.get(use)
                    if site is None:
                        errs.append(f"@{fn.name}/{b.name}: use of undefined variable {use}")
                    elif not dominates(site, b.name, idx):
                        errs.append(f"@{fn.name}/{b.name}: use of {use} not dominated by its definition")
    return errs
