"""Method-handle simplification: constant handles become direct calls,
then small direct callees are inlined bottom-up.

A callhandle whose handle operand traces back to a handleconst (directly or
through block arguments that agree on every path) is rewritten to a direct
call of the target. Direct calls are then inlined callee-first, subject to
a size budget and a no-recursion rule, which is what lets later passes see
through the lambda plumbing.
"""

from __future__ import annotations

from dataclasses import replace

from ..ir import Block, Br, CondBr, Function, Instr, NameGen, Program, Ret
from . import PassReport
from .util import program_instr_count, remove_dead_pure


def _known_handles(f: Function) -> dict[str, str]:
    """Value name -> function, for names that are handle constants on all paths."""
    known: dict[str, str] = {}
    for b in f.blocks:
        for i in b.instrs:
            if i.op == "handleconst":
                known[i.dest] = i.fn
    # propagate through block parameters whose incoming args all agree
    changed = True
    while changed:
        changed = False
        incoming: dict[tuple[str, int], set[str | None]] = {}
        for b in f.blocks:
            edges = []
            if isinstance(b.term, Br):
                edges.append((b.term.target, b.term.args))
            elif isinstance(b.term, CondBr):
                edges.append((b.term.then_target, b.term.then_args))
                edges.append((b.term.else_target, b.term.else_args))
            for target, args in edges:
                for pos, a in enumerate(args):
                    incoming.setdefault((target, pos), set()).add(known.get(a))
        bmap = f.block_map()
        for (target, pos), sources in incoming.items():
            param = bmap[target].params[pos]
            if param not in known and len(sources) == 1:
                fn = next(iter(sources))
                if fn is not None:
                    known[param] = fn
                    changed = True
    return known


def _devirtualize(f: Function, fn_names: set[str], report: PassReport) -> Function:
    known = _known_handles(f)
    blocks = []
    count = 0
    for b in f.blocks:
        instrs = []
        for i in b.instrs:
            if i.op == "callhandle" and known.get(i.args[0]) in fn_names:
                instrs.append(Instr("call", dest=i.dest, fn=known[i.args[0]], args=i.args[1:]))
                count += 1
            else:
                instrs.append(i)
        blocks.append(Block(b.name, b.params, tuple(instrs), b.term))
    if count:
        report.note(f.name, f"devirtualized {count} handle callsite(s)")
        report.rewrites += count
    return Function(f.name, f.params, tuple(blocks)) if count else f


def _recursive_functions(p: Program) -> frozenset[str]:
    calls = {
        f.name: {i.fn for b in f.blocks for i in b.instrs if i.op == "call"}
        for f in p.functions
    }

    def reaches(src: str, dst: str, seen: set[str]) -> bool:
        if src == dst and seen:
            return True
        if src in seen:
            return False
        seen.add(src)
        return any(reaches(n, dst, seen) for n in calls.get(src, ()))

    return frozenset(f.name for f in p.functions if f.name in calls[f.name]
                     or any(reaches(n, f.name, set()) for n in calls[f.name]))


def _bottom_up_order(p: Program) -> list[str]:
    calls = {
        f.name: [i.fn for b in f.blocks for i in b.instrs if i.op == "call"]
        for f in p.functions
    }
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str) -> None:
        if state.get(name):
            return
        state[name] = 1
        for n in calls.get(name, ()):
            if state.get(n) != 1:
                visit(n)
        state[name] = 2
        order.append(name)

    for f in p.functions:
        visit(f.name)
    return order


def _inline_site(f: Function, callee: Function, bname: str, idx: int, gen: NameGen) -> Function:
    bmap = f.block_map()
    b = bmap[bname]
    site = b.instrs[idx]
    rename = dict(zip(callee.params, site.args))
    for cb in callee.blocks:
        for q in cb.params:
            rename[q] = gen.fresh(q)
        for i in cb.instrs:
            if i.dest is not None:
                rename[i.dest] = gen.fresh(i.dest)
    bnames = {cb.name: gen.fresh(f"{callee.name}_{cb.name}") for cb in callee.blocks}
    cont = gen.fresh(f"{bname}_ret")

    inlined: list[Block] = []
    for cb in callee.blocks:
        instrs = tuple(
            replace(i.rename(rename), dest=rename.get(i.dest) if i.dest else None)
            for i in cb.instrs
        )
        term = cb.term
        if isinstance(term, Ret):
            args = (rename.get(term.value, term.value),) if term.value is not None else ()
            nterm: Br | CondBr = Br(cont, args if site.dest is not None else ())
        elif isinstance(term, Br):
            nterm = Br(bnames[term.target], tuple(rename.get(a, a) for a in term.args))
        else:
            nterm = CondBr(
                rename.get(term.cond, term.cond),
                bnames[term.then_target], tuple(rename.get(a, a) for a in term.then_args),
                bnames[term.else_target], tuple(rename.get(a, a) for a in term.else_args),
            )
        inlined.append(Block(bnames[cb.name], tuple(rename[q] for q in cb.params), instrs, nterm))

    head = Block(b.name, b.params, b.instrs[:idx], Br(bnames[callee.entry.name], ()))
    cont_params = (site.dest,) if site.dest is not None else ()
    cont_blk = Block(cont, cont_params, b.instrs[idx + 1:], b.term)

    blocks: list[Block] = []
    for blk in f.blocks:
        if blk.name == bname:
            blocks.append(head)
            blocks.extend(inlined)
            blocks.append(cont_blk)
        else:
            blocks.append(blk)
    return Function(f.name, f.params, tuple(blocks))


def _inline_all(p: Program, budget: int, report: PassReport) -> Program:
    recursive = _recursive_functions(p)
    fns = {f.name: f for f in p.functions}
    for name in _bottom_up_order(p):
        if name not in fns:
            continue
        f = fns[name]
        inlined_here = 0
        while True:
            site = None
            for b in f.blocks:
                for idx, i in enumerate(b.instrs):
                    if i.op != "call" or i.fn == name or i.fn in recursive:
                        continue
                    callee = fns[i.fn]
                    if callee.instr_count() > budget:
                        continue
                    if i.dest is not None and any(
                        isinstance(cb.term, Ret) and cb.term.value is None
                        for cb in callee.blocks
                    ):
                        continue  # callee may return no value
                    site = (b.name, idx, callee)
                    break
                if site:
                    break
            if site is None:
                break
            gen = NameGen(f.defined_names() | {b.name for b in f.blocks})
            f = _inline_site(f, site[2], site[0], site[1], gen)
            inlined_here += 1
        if inlined_here:
            f = remove_dead_pure(f)
            fns[name] = f
            report.note(name, f"inlined {inlined_here} callsite(s)")
            report.rewrites += inlined_here
    return replace(p, functions=tuple(fns[f.name] for f in p.functions))


def handle_simplify(p: Program, inline_budget: int = 40) -> tuple[Program, PassReport]:
    report = PassReport("handle_simplify", before_instrs=program_instr_count(p))
    fn_names = {f.name for f in p.functions}
    devirted = tuple(_devirtualize(f, fn_names, report) for f in p.functions)
    new_p = _inline_all(replace(p, functions=devirted), inline_budget, report)
    # handle constants left dangling by the rewrite disappear with their uses
    new_p = replace(new_p, functions=tuple(remove_dead_pure(f) for f in new_p.functions))
    if report.rewrites == 0:
        new_p = p
    report.after_instrs = program_instr_count(new_p)
    return new_p, report
