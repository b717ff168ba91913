"""Core IR: a miniature concurrent, object-oriented intermediate representation.

Programs are immutable. A program is a set of class definitions, a set of
functions in single-assignment form (block parameters instead of phi nodes),
and a non-empty list of threads started concurrently at program start.

Values at runtime are 64-bit signed integers, booleans, heap references,
null, and function handles. There are no floats, strings, or exceptions;
a failed guard is the only non-return exit.

Cross-thread state lives behind ``classref C``, which yields the per-class
singleton object (the moral equivalent of static fields); thread arguments
themselves are literals.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

BINOPS = ("add", "sub", "mul", "div", "mod", "lt", "le", "eq")
VBINOPS = ("add", "sub", "mul")

#: opcode -> (has dest, may omit dest)
OPCODES = {
    "const": True,
    "classref": True,
    "binop": True,
    "new": True,
    "newarray": True,
    "getfield": True,
    "putfield": False,
    "arrayload": True,
    "arraystore": False,
    "cas": True,
    "monitorenter": False,
    "monitorexit": False,
    "wait": False,
    "notify": False,
    "notifyall": False,
    "park": False,
    "unpark": False,
    "guard": False,
    "instanceof": True,
    "call": None,  # dest optional
    "callvirtual": None,
    "handleconst": True,
    "callhandle": None,
    "output": False,
    "vbinop": False,
}

#: opcodes with no heap or concurrency effects; safe to delete when unused
PURE_OPS = frozenset({"const", "classref", "binop", "instanceof", "handleconst"})


@dataclass(frozen=True)
class Instr:
    """One non-terminator instruction.

    ``args`` are value-name operands in positional order; the remaining
    fields are op-specific immediates and are None when unused.
    """

    op: str
    dest: str | None = None
    args: tuple[str, ...] = ()
    value: int | bool | None = None  # const payload; None encodes null
    cls: str | None = None  # new / classref / instanceof
    field: str | None = None  # getfield / putfield / cas
    kind: str | None = None  # binop / vbinop operator
    fn: str | None = None  # call / handleconst target
    method: str | None = None  # callvirtual selector
    reason: str | None = None  # guard tag
    width: int | None = None  # vbinop lane count

    def uses(self) -> tuple[str, ...]:
        return self.args

    def rename(self, mapping: dict[str, str]) -> "Instr":
        if not any(a in mapping for a in self.args):
            return self
        return replace(self, args=tuple(mapping.get(a, a) for a in self.args))


@dataclass(frozen=True)
class Br:
    target: str
    args: tuple[str, ...] = ()

    def uses(self) -> tuple[str, ...]:
        return self.args

    def targets(self) -> tuple[str, ...]:
        return (self.target,)

    def rename(self, mapping: dict[str, str]) -> "Br":
        return Br(self.target, tuple(mapping.get(a, a) for a in self.args))


@dataclass(frozen=True)
class CondBr:
    cond: str
    then_target: str
    then_args: tuple[str, ...] = ()
    else_target: str = ""
    else_args: tuple[str, ...] = ()

    def uses(self) -> tuple[str, ...]:
        return (self.cond,) + self.then_args + self.else_args

    def targets(self) -> tuple[str, ...]:
        return (self.then_target, self.else_target)

    def rename(self, mapping: dict[str, str]) -> "CondBr":
        return CondBr(
            mapping.get(self.cond, self.cond),
            self.then_target,
            tuple(mapping.get(a, a) for a in self.then_args),
            self.else_target,
            tuple(mapping.get(a, a) for a in self.else_args),
        )


@dataclass(frozen=True)
class Ret:
    value: str | None = None

    def uses(self) -> tuple[str, ...]:
        return (self.value,) if self.value is not None else ()

    def targets(self) -> tuple[str, ...]:
        return ()

    def rename(self, mapping: dict[str, str]) -> "Ret":
        if self.value is None:
            return self
        return Ret(mapping.get(self.value, self.value))


Terminator = Br | CondBr | Ret


@dataclass(frozen=True)
class Block:
    name: str
    params: tuple[str, ...]
    instrs: tuple[Instr, ...]
    term: Terminator


@dataclass(frozen=True)
class Function:
    """A function body; the first block is the entry and takes no params."""

    name: str
    params: tuple[str, ...]
    blocks: tuple[Block, ...]

    @property
    def entry(self) -> Block:
        return self.blocks[0]

    def block_map(self) -> dict[str, Block]:
        return {b.name: b for b in self.blocks}

    def defined_names(self) -> set[str]:
        names = set(self.params)
        for b in self.blocks:
            names.update(b.params)
            for i in b.instrs:
                if i.dest is not None:
                    names.add(i.dest)
        return names

    def instr_count(self) -> int:
        return sum(len(b.instrs) + 1 for b in self.blocks)


@dataclass(frozen=True)
class ClassDef:
    """A guest class: ordered fields plus (selector, function) method entries."""

    name: str
    superclass: str | None = None
    fields: tuple[str, ...] = ()
    methods: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ThreadDecl:
    fn: str
    args: tuple[int | bool | None, ...] = ()


@dataclass(frozen=True)
class Program:
    classes: tuple[ClassDef, ...]
    functions: tuple[Function, ...]
    threads: tuple[ThreadDecl, ...]

    def class_map(self) -> dict[str, ClassDef]:
        return {c.name: c for c in self.classes}

    def fn_map(self) -> dict[str, Function]:
        return {f.name: f for f in self.functions}

    def ancestry(self, cls: str) -> list[str]:
        """Class chain from `cls` up to its root, inclusive."""
        cmap = self.class_map()
        chain = []
        cur: str | None = cls
        while cur is not None:
            chain.append(cur)
            cur = cmap[cur].superclass
        return chain

    def declared_fields(self, cls: str) -> list[str]:
        """All fields visible on an instance of `cls`, root first."""
        out: list[str] = []
        for c in reversed(self.ancestry(cls)):
            out.extend(self.class_map()[c].fields)
        return out

    def resolve_method(self, cls: str, selector: str) -> str | None:
        """Dynamic dispatch: nearest class in the chain declaring `selector`."""
        for c in self.ancestry(cls):
            for sel, fname in self.class_map()[c].methods:
                if sel == selector:
                    return fname
        return None

    def with_function(self, fn: Function) -> "Program":
        fns = tuple(fn if f.name == fn.name else f for f in self.functions)
        return replace(self, functions=fns)


class NameGen:
    """Deterministic fresh-name source; reuses a base name when free."""

    def __init__(self, taken: set[str]):
        self.taken = set(taken)

    def fresh(self, base: str) -> str:
        if base not in self.taken:
            self.taken.add(base)
            return base
        i = 2
        while f"{base}_{i}" in self.taken:
            i += 1
        name = f"{base}_{i}"
        self.taken.add(name)
        return name


# -- convenience constructors used by passes and corpus builders -------------


def const(dest: str, value: int | bool | None) -> Instr:
    return Instr("const", dest=dest, value=value)


def classref(dest: str, cls: str) -> Instr:
    return Instr("classref", dest=dest, cls=cls)


def binop(dest: str, kind: str, a: str, b: str) -> Instr:
    return Instr("binop", dest=dest, kind=kind, args=(a, b))


def new(dest: str, cls: str) -> Instr:
    return Instr("new", dest=dest, cls=cls)


def newarray(dest: str, length: str) -> Instr:
    return Instr("newarray", dest=dest, args=(length,))


def getfield(dest: str, obj: str, fld: str) -> Instr:
    return Instr("getfield", dest=dest, args=(obj,), field=fld)


def putfield(obj: str, fld: str, val: str) -> Instr:
    return Instr("putfield", args=(obj, val), field=fld)


def arrayload(dest: str, arr: str, idx: str) -> Instr:
    return Instr("arrayload", dest=dest, args=(arr, idx))


def arraystore(arr: str, idx: str, val: str) -> Instr:
    return Instr("arraystore", args=(arr, idx, val))


def cas(dest: str, obj: str, fld: str, expect: str, newv: str) -> Instr:
    return Instr("cas", dest=dest, args=(obj, expect, newv), field=fld)


def guard(cond: str, reason: str) -> Instr:
    return Instr("guard", args=(cond,), reason=reason)


def instanceof(dest: str, obj: str, cls: str) -> Instr:
    return Instr("instanceof", dest=dest, args=(obj,), cls=cls)


def call(dest: str | None, fn: str, args: tuple[str, ...] = ()) -> Instr:
    return Instr("call", dest=dest, fn=fn, args=args)


def callvirtual(dest: str | None, obj: str, method: str, args: tuple[str, ...] = ()) -> Instr:
    return Instr("callvirtual", dest=dest, method=method, args=(obj,) + args)


def handleconst(dest: str, fn: str) -> Instr:
    return Instr("handleconst", dest=dest, fn=fn)


def callhandle(dest: str | None, handle: str, args: tuple[str, ...] = ()) -> Instr:
    return Instr("callhandle", dest=dest, args=(handle,) + args)


def output(val: str) -> Instr:
    return Instr("output", args=(val,))


def vbinop(kind: str, dst: str, a: str, b: str, offset: str, width: int) -> Instr:
    return Instr("vbinop", kind=kind, args=(dst, a, b, offset), width=width)


def monitor(op: str, obj: str) -> Instr:
    return Instr(op, args=(obj,))


# -- canonical printer --------------------------------------------------------


def _lit(v: int | bool | None) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    return str(v)


def _edge(target: str, args: tuple[str, ...]) -> str:
    return f"{target}({', '.join(args)})" if args else target


def format_instr(i: Instr) -> str:
    lhs = f"{i.dest} = " if i.dest is not None else ""
    op = i.op
    if op == "const":
        return f"{lhs}const {_lit(i.value)}"
    if op == "classref":
        return f"{lhs}classref {i.cls}"
    if op == "binop":
        return f"{lhs}binop {i.kind}, {i.args[0]}, {i.args[1]}"
    if op == "new":
        return f"{lhs}new {i.cls}"
    if op == "newarray":
        return f"{lhs}newarray {i.args[0]}"
    if op == "getfield":
        return f"{lhs}getfield {i.args[0]}, {i.field}"
    if op == "putfield":
        return f"putfield {i.args[0]}, {i.field}, {i.args[1]}"
    if op == "arrayload":
        return f"{lhs}arrayload {i.args[0]}, {i.args[1]}"
    if op == "arraystore":
        return f"arraystore {i.args[0]}, {i.args[1]}, {i.args[2]}"
    if op == "cas":
        return f"{lhs}cas {i.args[0]}, {i.field}, {i.args[1]}, {i.args[2]}"
    if op in ("monitorenter", "monitorexit", "wait", "notify", "notifyall"):
        return f"{op} {i.args[0]}"
    if op == "park":
        return "park"
    if op == "unpark":
        return f"unpark {i.args[0]}"
    if op == "guard":
        return f"guard {i.args[0]}, {i.reason}"
    if op == "instanceof":
        return f"{lhs}instanceof {i.args[0]}, {i.cls}"
    if op == "call":
        return f"{lhs}call {i.fn}({', '.join(i.args)})"
    if op == "callvirtual":
        return f"{lhs}callvirtual {i.args[0]}.{i.method}({', '.join(i.args[1:])})"
    if op == "handleconst":
        return f"{lhs}handleconst {i.fn}"
    if op == "callhandle":
        return f"{lhs}callhandle {i.args[0]}({', '.join(i.args[1:])})"
    if op == "output":
        return f"output {i.args[0]}"
    if op == "vbinop":
        d, a, b, off = i.args
        return f"vbinop {i.kind}, {d}, {a}, {b}, {off}, {i.width}"
    raise ValueError(f"unknown opcode {op!r}")


def format_term(t: Terminator) -> str:
    if isinstance(t, Br):
        return f"br {_edge(t.target, t.args)}"
    if isinstance(t, CondBr):
        return (
            f"condbr {t.cond}, {_edge(t.then_target, t.then_args)}, "
            f"{_edge(t.else_target, t.else_args)}"
        )
    if isinstance(t, Ret):
        return f"ret {t.value}" if t.value is not None else "ret"
    raise ValueError(f"unknown terminator {t!r}")


def print_program(p: Program) -> str:
    """Canonical text form; `parse(print_program(p))` is structurally `p`."""
    out: list[str] = []
    for c in p.classes:
        head = f"class {c.name}"
        if c.superclass:
            head += f" extends {c.superclass}"
        items = []
        if c.fields:
            items.append(f"fields {', '.join(c.fields)};")
        if c.methods:
            ms = ", ".join(fn if sel == fn else f"{sel}={fn}" for sel, fn in c.methods)
            items.append(f"methods {ms};")
        body = " ".join(items)
        out.append(f"{head} {{ {body} }}" if body else f"{head} {{ }}")
    if p.classes:
        out.append("")
    for f in p.functions:
        out.append(f"fn {f.name}({', '.join(f.params)}) {{")
        for b in f.blocks:
            label = f"{b.name}({', '.join(b.params)})" if b.params else b.name
            out.append(f"{label}:")
            for i in b.instrs:
                out.append(f"  {format_instr(i)}")
            out.append(f"  {format_term(b.term)}")
        out.append("}")
        out.append("")
    for t in p.threads:
        out.append(f"thread {t.fn}({', '.join(_lit(a) for a in t.args)})")
    return "\n".join(out) + "\n"
