"""Loop vectorization for elementwise array loops.

A countable loop whose body is exactly ``c[i] = a[i] op b[i]`` with stride-1
index steps by W lanes using a single vector operation, followed by a scalar
remainder loop for the final N mod W elements. Eligibility is conservative:

* a, b, c trace to three distinct allocation sites in the same function
  (alias freedom), there is no cross-iteration dependence to respect;
* the body contains no guard (bounds checks must have been hoisted first,
  which is why disabling guard motion starves this pass) and nothing else.

The vector and scalar paths compute identical values, so outputs are
bit-equal to the scalar execution.
"""

from __future__ import annotations

from dataclasses import replace

from .. import ir
from ..cfg import find_induction_var, match_while_loop, natural_loops, predecessors
from ..ir import Block, Br, CondBr, Function, Instr, NameGen, Program
from . import PassReport
from .util import def_index, program_instr_count


def _match_body(body: Block, iv_names: frozenset[str], defs) -> tuple | str:
    """Returns (a, b, c, op, store, inc_dest) or a skip reason.

    `iv_names` holds every name carrying the current induction value (the
    header param and its in-loop copies); all indices must come from it.
    """
    if any(i.op == "guard" for i in body.instrs):
        return "guard-present"
    loads: list[Instr] = []
    stores: list[Instr] = []
    binops: list[Instr] = []
    for i in body.instrs:
        if i.op == "arrayload" and i.args[1] in iv_names:
            loads.append(i)
        elif i.op == "arraystore" and i.args[1] in iv_names:
            stores.append(i)
        elif i.op == "binop" and i.kind in ir.VBINOPS:
            binops.append(i)
        elif i.op == "const":
            pass
        else:
            return "shape"
    if len(loads) != 2 or len(stores) != 1 or len(binops) != 2:
        return "shape"
    load_dests = {i.dest for i in loads}
    elementwise = [i for i in binops if set(i.args) == load_dests]
    if len(elementwise) != 1:
        return "shape"
    compute = elementwise[0]
    inc = next((i for i in binops if i is not compute), None)
    if inc is None or inc.kind != "add" or inc.args[0] not in iv_names:
        return "shape"
    one = defs.get(inc.args[1])
    if one is None or one.op != "const" or one.value != 1:
        return "shape"
    store = stores[0]
    if store.args[2] != compute.dest:
        return "shape"
    a = loads[0] if loads[0].dest == compute.args[0] else loads[1]
    b = loads[1] if a is loads[0] else loads[0]
    return (a.args[0], b.args[0], store.args[0], compute.kind, store, inc.dest)


def _vectorize_fn(f: Function, width: int, report: PassReport,
                  skipped: set[str]) -> Function | None:
    defs = def_index(f)
    preds = predecessors(f)
    for loop in natural_loops(f):
        wl = match_while_loop(f, loop)
        where = f"{f.name}/{loop.header}"
        if wl is None:
            continue
        if loop.blocks != frozenset({wl.header.name, wl.body_target}) or wl.latch != wl.body_target:
            continue
        if preds[wl.body_target] != [wl.header.name]:
            continue
        header = wl.header
        if len(header.params) != 1 or len(header.instrs) != 1:
            continue
        cond = header.instrs[0]
        if cond.op != "binop" or cond.kind != "lt" or cond.dest != wl.cond:
            continue
        iv = find_induction_var(f, wl)
        if iv is None:
            continue
        body = f.block_map()[wl.body_target]
        m = _match_body(body, iv.aliases, defs)
        if isinstance(m, str):
            if m != "shape" and where not in skipped:
                skipped.add(where)
                report.skip(where, m)
            continue
        a_arr, b_arr, c_arr, op, store, inc_dest = m
        sites = {}
        for name in (a_arr, b_arr, c_arr):
            d = defs.get(name)
            if d is None or d.op != "newarray":
                sites = None
                break
            sites[name] = id(d)
        if sites is None or len({a_arr, b_arr, c_arr}) != 3:
            if where not in skipped:
                skipped.add(where)
                report.skip(where, "alias-unknown")
            continue
        vectorized_already = any(
            i.op == "vbinop" and i.args[0] == c_arr for blk in f.blocks for i in blk.instrs
        )
        if vectorized_already:
            if where not in skipped:
                skipped.add(where)
                report.skip(where, "already vectorized")
            continue

        gen = NameGen(f.defined_names() | {b.name for b in f.blocks})
        limit = iv.limit
        ivp = iv.param
        wc = gen.fresh("vec_w")
        iw = gen.fresh("vec_end")
        cm = gen.fresh("vec_fit")
        wb = gen.fresh("vec_step")
        rem_hdr = gen.fresh(f"{header.name}_rem")
        rem_body = gen.fresh(f"{body.name}_rem")
        rem_iv = gen.fresh(f"{ivp}_rem")

        new_header = Block(
            header.name, header.params,
            (
                ir.const(wc, width),
                ir.binop(iw, "add", ivp, wc),
                ir.binop(cm, "le", iw, limit),
            ),
            CondBr(cm, body.name, (), rem_hdr, (ivp,)),
        )
        vec_body = Block(
            body.name, (),
            (
                ir.vbinop(op, c_arr, a_arr, b_arr, ivp, width),
                ir.const(wb, width),
                ir.binop(inc_dest, "add", ivp, wb),
            ),
            Br(header.name, (inc_dest,)),
        )
        rrename = {ivp: rem_iv, cond.dest: gen.fresh(f"{cond.dest}_rem")}
        for q in body.params:
            rrename[q] = gen.fresh(f"{q}_rem")
        rem_header = Block(
            rem_hdr, (rem_iv,),
            (replace(cond.rename(rrename), dest=rrename[cond.dest]),),
            CondBr(rrename[cond.dest], rem_body,
                   tuple(rrename.get(x, x) for x in wl.body_args),
                   wl.exit_target, tuple(rrename.get(x, x) for x in wl.exit_args)),
        )
        body_instrs = []
        for i in body.instrs:
            renamed = i.rename(rrename)
            if i.dest is not None:
                rrename[i.dest] = gen.fresh(f"{i.dest}_rem")
                renamed = replace(renamed, dest=rrename[i.dest])
            body_instrs.append(renamed)
        rem_blk = Block(rem_body, tuple(rrename[q] for q in body.params),
                        tuple(body_instrs), Br(rem_hdr, (rrename[inc_dest],)))

        blocks = []
        for blk in f.blocks:
            if blk.name == header.name:
                blocks.append(new_header)
            elif blk.name == body.name:
                blocks.extend([vec_body, rem_header, rem_blk])
            else:
                blocks.append(blk)
        report.note(f.name, f"vectorized loop at {loop.header} (width {width})")
        report.rewrites += 1
        return Function(f.name, f.params, tuple(blocks))
    return None


def loop_vectorize(p: Program, width: int = 4) -> tuple[Program, PassReport]:
    if width < 2:
        raise ValueError("vector width must be >= 2")
    report = PassReport("loop_vectorize", before_instrs=program_instr_count(p))
    fns = list(p.functions)
    for n in range(len(fns)):
        skipped: set[str] = set()
        while True:
            nf = _vectorize_fn(fns[n], width, report, skipped)
            if nf is None:
                break
            fns[n] = nf
    new_p = replace(p, functions=tuple(fns))
    if report.rewrites == 0:
        new_p = p
    report.after_instrs = program_instr_count(new_p)
    return new_p, report
