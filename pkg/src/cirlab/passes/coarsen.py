"""Loop-wide lock coarsening: tile the iteration space into C-sized chunks.

A loop of the shape

    header:  <condition>; condbr c, body, exit
    body:    monitorenter m; ...region...; monitorexit m; <tail>; br header

is rewritten so the monitor is acquired once per chunk: an outer loop keeps
the original condition, an inner loop runs up to C iterations of the body
(plus the condition between them) while holding the lock, and a release
block gives the monitor up between chunks. A C-sized chunk executes the
monitor pair once, so an N-iteration loop performs ceil(N/C) acquisitions.

The modulo check on the chunk counter is replaced by a down-counter, which
is observationally identical and cheaper.

Legality: the monitor object is loop-invariant and neither the condition
nor the region may block (no other monitor operations, no wait/notify/park,
calls only to functions proved free of them).
"""

from __future__ import annotations

from dataclasses import replace

from .. import ir
from ..cfg import match_while_loop, natural_loops, predecessors
from ..ir import Block, Br, CondBr, Function, NameGen, Program
from . import PassReport
from .purity import blocking_free_functions
from .util import program_instr_count


def _region_blockers(instrs, blocking_free: frozenset[str]) -> str | None:
    for i in instrs:
        if i.op in ("wait", "notify", "notifyall", "park", "unpark"):
            return "blocking op in region"
        if i.op in ("monitorenter", "monitorexit"):
            return "nested monitor op in region"
        if i.op in ("call",) and i.fn not in blocking_free:
            return "call may block"
        if i.op in ("callvirtual", "callhandle"):
            return "dynamic call may block"
    return None


def _coarsen_fn(p: Program, f: Function, chunk: int, report: PassReport,
                blocking_free: frozenset[str]) -> Function | None:
    for loop in natural_loops(f):
        wl = match_while_loop(f, loop)
        where = f"{f.name}/{loop.header}"
        if wl is None:
            continue
        if loop.blocks != frozenset({wl.header.name, wl.body_target}) or wl.latch != wl.body_target:
            continue
        body = f.block_map()[wl.body_target]
        if predecessors(f)[body.name] != [wl.header.name]:
            continue
        if not body.instrs or body.instrs[0].op != "monitorenter":
            continue
        monitor = body.instrs[0].args[0]
        exits = [k for k, i in enumerate(body.instrs) if i.op == "monitorexit"]
        if len(exits) != 1 or body.instrs[exits[0]].args[0] != monitor:
            report.skip(where, "unbalanced monitor region")
            continue
        region = body.instrs[1:exits[0]]
        tail = body.instrs[exits[0] + 1:]
        reason = _region_blockers(region + tail, blocking_free)
        if reason is None:
            reason = _region_blockers(wl.header.instrs, blocking_free)
            reason = reason and "condition may block"
        if reason is not None:
            report.skip(where, reason)
            continue
        defined_in_loop = set()
        for b2 in f.blocks:
            if b2.name in loop.blocks:
                defined_in_loop.update(b2.params)
                defined_in_loop.update(i.dest for i in b2.instrs if i.dest is not None)
        if monitor in defined_in_loop:
            report.skip(where, "monitor object is not loop-invariant")
            continue

        gen = NameGen(f.defined_names() | {b.name for b in f.blocks})
        header = wl.header
        acq = gen.fresh(f"{body.name}_acquire")
        inner = gen.fresh(f"{body.name}_locked")
        icond = gen.fresh(f"{header.name}_locked")
        rel = gen.fresh(f"{body.name}_release")

        acq_params = tuple(gen.fresh(f"{q}_a") for q in body.params)
        kc = gen.fresh("chunk_left")
        k_param = gen.fresh("chunk_k")
        kone = gen.fresh("chunk_one")
        kdec = gen.fresh("chunk_dec")
        kzero = gen.fresh("chunk_zero")
        kdone = gen.fresh("chunk_done")
        ic_params = tuple(gen.fresh(f"{q}_c") for q in header.params)
        ic_k = gen.fresh("chunk_kc")
        rel_params = tuple(gen.fresh(f"{q}_r") for q in header.params)

        # values the body passes back to the header (the next loop state)
        back_args = body.term.args if isinstance(body.term, Br) else ()

        new_header = Block(
            header.name, header.params, header.instrs,
            CondBr(wl.cond, acq, wl.body_args, wl.exit_target, wl.exit_args),
        )
        acq_blk = Block(
            acq, acq_params,
            (ir.monitor("monitorenter", monitor), ir.const(kc, chunk)),
            Br(inner, acq_params + (kc,)),
        )
        inner_blk = Block(
            inner, body.params + (k_param,),
            region + tail + (
                ir.const(kone, 1),
                ir.binop(kdec, "sub", k_param, kone),
                ir.const(kzero, 0),
                ir.binop(kdone, "eq", kdec, kzero),
            ),
            CondBr(kdone, rel, back_args, icond, back_args + (kdec,)),
        )
        ic_rename = dict(zip(header.params, ic_params))
        ic_instrs = []
        for i in header.instrs:
            renamed = i.rename(ic_rename)
            if i.dest is not None:
                ic_rename[i.dest] = gen.fresh(f"{i.dest}_c")
                renamed = replace(renamed, dest=ic_rename[i.dest])
            ic_instrs.append(renamed)
        ic_body_args = tuple(ic_rename.get(a, a) for a in wl.body_args)
        icond_blk = Block(
            icond, ic_params + (ic_k,), tuple(ic_instrs),
            CondBr(ic_rename.get(wl.cond, wl.cond), inner, ic_body_args + (ic_k,), rel, ic_params),
        )
        rel_blk = Block(
            rel, rel_params,
            (ir.monitor("monitorexit", monitor),),
            Br(header.name, rel_params),
        )

        blocks = []
        for b in f.blocks:
            if b.name == header.name:
                blocks.append(new_header)
            elif b.name == body.name:
                blocks.extend([acq_blk, inner_blk, icond_blk, rel_blk])
            else:
                blocks.append(b)
        report.note(f.name, f"coarsened loop at {loop.header} with chunk {chunk}")
        report.rewrites += 1
        return Function(f.name, f.params, tuple(blocks))
    return None


def lock_coarsen(p: Program, chunk: int = 32) -> tuple[Program, PassReport]:
    if chunk < 1:
        raise ValueError("chunk size must be >= 1")
    report = PassReport("lock_coarsen", before_instrs=program_instr_count(p))
    blocking_free = blocking_free_functions(p)
    fns = list(p.functions)
    changed = True
    while changed:
        changed = False
        for n, f in enumerate(fns):
            prog = replace(p, functions=tuple(fns))
            nf = _coarsen_fn(prog, f, chunk, report, blocking_free)
            if nf is not None:
                fns[n] = nf
                changed = True
    new_p = replace(p, functions=tuple(fns))
    if report.rewrites == 0:
        new_p = p
    report.after_instrs = program_instr_count(new_p)
    return new_p, report
