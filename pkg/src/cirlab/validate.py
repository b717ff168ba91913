"""Structural validation: name resolution plus the IR's shape invariants.

`validate` returns a list of diagnostics (empty means the program is well
formed). Resolution checks are split out because the parser also runs them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Block, Br, CondBr, Function, Program, Ret


@dataclass(frozen=True)
class Diagnostic:
    where: str  # "class A", "fn main", "fn main/b0", ...
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


def _d(where: str, message: str) -> Diagnostic:
    return Diagnostic(where, message)


def resolution_diagnostics(p: Program) -> list[Diagnostic]:
    """Unresolved classes, functions, fields, methods, blocks, and thread entries."""
    out: list[Diagnostic] = []
    classes = {c.name for c in p.classes}
    functions = {f.name for f in p.functions}
    all_fields = {f for c in p.classes for f in c.fields}
    all_selectors = {sel for c in p.classes for sel, _ in c.methods}

    for c in p.classes:
        if c.superclass is not None and c.superclass not in classes:
            out.append(_d(f"class {c.name}", f"unknown superclass {c.superclass!r}"))
        for sel, fname in c.methods:
            if fname not in functions:
                out.append(_d(f"class {c.name}", f"method {sel!r} names unknown function {fname!r}"))

    for f in p.functions:
        blocks = {b.name for b in f.blocks}
        where = f"fn {f.name}"
        for b in f.blocks:
            for i in b.instrs:
                if i.op in ("new", "classref", "instanceof") and i.cls not in classes:
                    out.append(_d(where, f"unknown class {i.cls!r}"))
                if i.op in ("getfield", "putfield", "cas") and i.field not in all_fields:
                    out.append(_d(where, f"field {i.field!r} is not declared by any class"))
                if i.op in ("call", "handleconst") and i.fn not in functions:
                    out.append(_d(where, f"unknown function {i.fn!r}"))
                if i.op == "callvirtual" and i.method not in all_selectors:
                    out.append(_d(where, f"method {i.method!r} is not declared by any class"))
            for t in b.term.targets():
                if t not in blocks:
                    out.append(_d(where, f"branch to unknown block {t!r}"))

    for t in p.threads:
        if t.fn not in functions:
            out.append(_d("thread", f"unknown entry function {t.fn!r}"))

    return out


def _superclass_cycles(p: Program) -> list[Diagnostic]:
    out = []
    cmap = p.class_map()
    reported: set[str] = set()
    for c in p.classes:
        if c.name in reported:
            continue
        seen = {c.name}
        cur = c.superclass
        while cur is not None and cur in cmap:
            if cur in seen:
                out.append(_d(f"class {c.name}", "superclass chain contains a cycle"))
                reported.update(seen)
                break
            seen.add(cur)
            cur = cmap[cur].superclass
    return out


def _class_diagnostics(p: Program) -> list[Diagnostic]:
    out = []
    names = set()
    for c in p.classes:
        if c.name in names:
            out.append(_d(f"class {c.name}", "duplicate class name"))
        names.add(c.name)
        if len(set(c.fields)) != len(c.fields):
            out.append(_d(f"class {c.name}", "duplicate field names"))
    cycles = _superclass_cycles(p)
    out.extend(cycles)
    if not cycles:
        cmap = p.class_map()
        for c in p.classes:
            if c.superclass is None or c.superclass not in cmap:
                continue
            inherited = set()
            cur = c.superclass
            while cur is not None:
                inherited.update(cmap[cur].fields)
                cur = cmap[cur].superclass
            for f in c.fields:
                if f in inherited:
                    out.append(_d(f"class {c.name}", f"redeclares superclass field {f!r}"))
    return out


def _defined_once(f: Function) -> list[Diagnostic]:
    out = []
    seen: set[str] = set()
    for name in f.params:
        if name in seen:
            out.append(_d(f"fn {f.name}", f"value {name!r} defined more than once"))
        seen.add(name)
    for b in f.blocks:
        for name in b.params:
            if name in seen:
                out.append(_d(f"fn {f.name}/{b.name}", f"value {name!r} defined more than once"))
            seen.add(name)
        for i in b.instrs:
            if i.dest is None:
                continue
            if i.dest in seen:
                out.append(_d(f"fn {f.name}/{b.name}", f"value {i.dest!r} defined more than once"))
            seen.add(i.dest)
    return out


def _def_before_use(f: Function) -> list[Diagnostic]:
    """Every use must be reached by its definition along all paths.

    Forward dataflow: defs available at block entry = intersection over
    predecessors of (their entry set + their own defs); entry starts from the
    function params. Unreachable blocks are skipped (reported separately).
    """
    out: list[Diagnostic] = []
    bmap = f.block_map()
    preds: dict[str, list[str]] = {b.name: [] for b in f.blocks}
    for b in f.blocks:
        for t in b.term.targets():
            if t in preds:
                preds[t].append(b.name)

    def block_defs(b: Block) -> set[str]:
        s = set(b.params)
        s.update(i.dest for i in b.instrs if i.dest is not None)
        return s

    avail_in: dict[str, set[str]] = {f.entry.name: set(f.params)}
    order = _reachable_rpo(f)
    changed = True
    while changed:
        changed = False
        for name in order:
            if name == f.entry.name:
                inset = set(f.params)
            else:
                ps = [q for q in preds[name] if q in avail_in]
                if not ps:
                    continue
                inset = set.intersection(
                    *[avail_in[q] | block_defs(bmap[q]) for q in ps]
                )
            if name not in avail_in or avail_in[name] != inset:
                avail_in[name] = inset
                changed = True

    for name in order:
        b = bmap[name]
        live = set(avail_in.get(name, set())) | set(b.params)
        for i in b.instrs:
            for u in i.uses():
                if u not in live:
                    out.append(_d(f"fn {f.name}/{name}", f"use of {u!r} before definition"))
            if i.dest is not None:
                live.add(i.dest)
        for u in b.term.uses():
            if u not in live:
                out.append(_d(f"fn {f.name}/{name}", f"use of {u!r} before definition"))
    return out


def _reachable_rpo(f: Function) -> list[str]:
    bmap = f.block_map()
    seen: set[str] = set()
    order: list[str] = []
    stack: list[tuple[str, bool]] = [(f.entry.name, False)]
    while stack:
        name, expanded = stack.pop()
        if expanded:
            order.append(name)
            continue
        if name in seen or name not in bmap:
            continue
        seen.add(name)
        stack.append((name, True))
        for t in reversed(bmap[name].term.targets()):
            if t not in seen:
                stack.append((t, False))
    order.reverse()
    return order


def _fn_diagnostics(p: Program, f: Function) -> list[Diagnostic]:
    out = []
    names = set()
    for b in f.blocks:
        if b.name in names:
            out.append(_d(f"fn {f.name}", f"duplicate block label {b.name!r}"))
        names.add(b.name)
    if f.entry.params:
        out.append(_d(f"fn {f.name}", "entry block must not take parameters"))
    bmap = f.block_map()
    fmap = p.fn_map()
    for b in f.blocks:
        for i in b.instrs:
            if i.op == "vbinop" and (i.width is None or i.width < 2):
                out.append(_d(f"fn {f.name}/{b.name}", "vbinop width must be >= 2"))
            if i.op == "call" and i.fn in fmap and len(i.args) != len(fmap[i.fn].params):
                out.append(
                    _d(
                        f"fn {f.name}/{b.name}",
                        f"call passes {len(i.args)} args, {i.fn} takes {len(fmap[i.fn].params)}",
                    )
                )
        if isinstance(b.term, (Br, CondBr)):
            edges = (
                [(b.term.target, b.term.args)]
                if isinstance(b.term, Br)
                else [
                    (b.term.then_target, b.term.then_args),
                    (b.term.else_target, b.term.else_args),
                ]
            )
            for target, args in edges:
                if target in bmap and len(args) != len(bmap[target].params):
                    out.append(
                        _d(
                            f"fn {f.name}/{b.name}",
                            f"branch to {target!r} passes {len(args)} args, "
                            f"block takes {len(bmap[target].params)}",
                        )
                    )
        elif not isinstance(b.term, Ret):
            out.append(_d(f"fn {f.name}/{b.name}", "block has no terminator"))
    out.extend(_defined_once(f))
    out.extend(_def_before_use(f))
    return out


def validate(p: Program) -> list[Diagnostic]:
    """All invariant violations; empty list means valid."""
    out = resolution_diagnostics(p)
    out.extend(_class_diagnostics(p))
    fn_names = set()
    for f in p.functions:
        if f.name in fn_names:
            out.append(_d(f"fn {f.name}", "duplicate function name"))
        fn_names.add(f.name)
        out.extend(_fn_diagnostics(p, f))
    if not p.threads:
        out.append(_d("program", "thread list is empty"))
    fmap = p.fn_map()
    for t in p.threads:
        if t.fn in fmap and len(t.args) != len(fmap[t.fn].params):
            out.append(
                _d("thread", f"{t.fn} takes {len(fmap[t.fn].params)} params, got {len(t.args)} args")
            )
    return out
