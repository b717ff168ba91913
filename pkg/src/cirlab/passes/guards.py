"""Speculative guard motion: hoist guards out of loops.

Two shapes are hoisted, both landing in a guard block that runs once before
the loop:

* loop-invariant conditions (the condition, or a short pure chain computing
  it from invariants) move verbatim;
* inequalities over the loop's induction variable are rewritten to endpoint
  form: with i running upward by 1, ``guard(i < X)`` holds on every
  iteration iff it holds at the last value, so a single ``guard(last < X)``
  replaces N dynamic checks (and symmetrically against the initial value
  for lower bounds).

The guard block is only entered when the loop itself will run: the
preheader evaluates the loop condition on the initial values and bypasses
the guards otherwise, so an empty loop cannot deoptimize. A hoisted guard
implies every in-loop check it replaced; the transformed program may
deoptimize more often (the guarded branch may never have been taken), never
less.
"""

from __future__ import annotations

from dataclasses import replace

from .. import ir
from ..cfg import find_induction_var, match_while_loop, natural_loops
from ..ir import Block, Br, CondBr, Function, Instr, NameGen, Program
from . import PassReport
from .util import def_index, program_instr_count, remove_dead_pure

_CHAIN_OPS = frozenset({"const", "binop", "instanceof"})
_HEADER_OK = frozenset({"const", "classref", "binop", "instanceof", "getfield", "arrayload"})
_MAX_CHAIN = 8


def _invariant_chain(name: str, loop_defs: set[str], defs: dict[str, Instr]) -> list[Instr] | None:
    """Instrs (in emit order) recomputing `name` from loop-invariant values."""
    if name not in loop_defs:
        return []
    i = defs.get(name)
    if i is None or i.op not in _CHAIN_OPS or (i.op == "binop" and i.kind in ("div", "mod")):
        return None
    chain: list[Instr] = []
    for a in i.args:
        sub = _invariant_chain(a, loop_defs, defs)
        if sub is None:
            return None
        chain.extend(x for x in sub if x not in chain)
    chain.append(i)
    return chain if len(chain) <= _MAX_CHAIN else None


def _endpoint_form(cond: Instr, iv_aliases: frozenset[str], loop_defs: set[str]):
    """(kind, lhs_is_iv, other) for a hoistable induction inequality."""
    if cond.op != "binop" or cond.kind not in ("lt", "le"):
        return None
    a, b = cond.args
    if a in iv_aliases and b not in loop_defs:
        return (cond.kind, True, b)  # iv < X: hardest at the last value
    if b in iv_aliases and a not in loop_defs:
        return (cond.kind, False, a)  # X < iv: hardest at the initial value
    return None


def _hoist_one(f: Function, report: PassReport, skipped: set[str]) -> Function | None:
    defs = def_index(f)
    for loop in natural_loops(f):
        wl = match_while_loop(f, loop)
        where = f"{f.name}/{loop.header}"
        if wl is None:
            continue
        loop_defs = set()
        bmap = f.block_map()
        for bn in loop.blocks:
            loop_defs.update(bmap[bn].params)
            loop_defs.update(i.dest for i in bmap[bn].instrs if i.dest is not None)
        if any(i.op not in _HEADER_OK for i in wl.header.instrs):
            if where not in skipped:
                skipped.add(where)
                report.skip(where, "loop condition has side effects")
            continue
        iv = find_induction_var(f, wl)
        aliases = iv.aliases if iv is not None else frozenset()

        plans = []  # (block, idx, kind, payload)
        for bn in sorted(loop.blocks):
            for idx, i in enumerate(bmap[bn].instrs):
                if i.op != "guard":
                    continue
                key = f"{where}@{bn}:{idx}"
                chain = _invariant_chain(i.args[0], loop_defs, defs)
                if chain is not None:
                    plans.append((bn, idx, "invariant", (chain, i)))
                    continue
                cond_def = defs.get(i.args[0])
                form = _endpoint_form(cond_def, aliases, loop_defs) if (
                    cond_def is not None and iv is not None) else None
                if form is not None:
                    plans.append((bn, idx, "induction", (form, i)))
                elif key not in skipped:
                    skipped.add(key)
                    report.skip(key, "guard depends on loop-varying values")
        if not plans:
            continue

        gen = NameGen(f.defined_names() | {b.name for b in f.blocks})
        header = wl.header
        pre = gen.fresh(f"{header.name}_pre")
        gblk = gen.fresh(f"{header.name}_guards")
        pre_params = tuple(gen.fresh(f"{q}_p") for q in header.params)
        g_params = tuple(gen.fresh(f"{q}_g") for q in header.params)

        pre_rename = dict(zip(header.params, pre_params))
        pre_instrs = []
        for i in header.instrs:
            renamed = i.rename(pre_rename)
            if i.dest is not None:
                pre_rename[i.dest] = gen.fresh(f"{i.dest}_p")
                renamed = replace(renamed, dest=pre_rename[i.dest])
            pre_instrs.append(renamed)
        pre_blk = Block(
            pre, pre_params, tuple(pre_instrs),
            CondBr(pre_rename.get(wl.cond, wl.cond), gblk, pre_params, header.name, pre_params),
        )

        g_instrs: list[Instr] = []
        iv_init = dict(zip(header.params, g_params)).get(iv.param) if iv else None
        for bn, idx, kind, payload in plans:
            if kind == "invariant":
                chain, g = payload
                rename: dict[str, str] = {}
                for ci in chain:
                    renamed = ci.rename(rename)
                    rename[ci.dest] = gen.fresh(f"{ci.dest}_h")
                    g_instrs.append(replace(renamed, dest=rename[ci.dest]))
                g_instrs.append(ir.guard(rename.get(g.args[0], g.args[0]), g.reason))
            else:
                (cmp_kind, lhs_is_iv, other), g = payload
                if lhs_is_iv:
                    if iv.cmp == "lt":
                        one = gen.fresh("hoist_one")
                        last = gen.fresh("hoist_last")
                        g_instrs.append(ir.const(one, 1))
                        g_instrs.append(ir.binop(last, "sub", iv.limit, one))
                    else:
                        last = iv.limit
                    cond_name = gen.fresh("hoist_cmp")
                    g_instrs.append(ir.binop(cond_name, cmp_kind, last, other))
                else:
                    cond_name = gen.fresh("hoist_cmp")
                    g_instrs.append(ir.binop(cond_name, cmp_kind, other, iv_init))
                g_instrs.append(ir.guard(cond_name, g.reason))
        g_blk = Block(gblk, g_params, tuple(g_instrs), Br(header.name, g_params))

        to_remove = {(bn, idx) for bn, idx, _, _ in plans}
        blocks = []
        for b in f.blocks:
            if b.name == header.name:
                blocks.append(pre_blk)
                blocks.append(g_blk)
                blocks.append(b)
                continue
            if b.name in loop.blocks:
                kept = tuple(i for idx, i in enumerate(b.instrs) if (b.name, idx) not in to_remove)
                if kept != b.instrs:
                    b = Block(b.name, b.params, kept, b.term)
            if b.name not in loop.blocks:
                # entry edges now run through the preheader
                term = b.term
                if isinstance(term, Br) and term.target == header.name:
                    term = Br(pre, term.args)
                elif isinstance(term, CondBr):
                    t1 = pre if term.then_target == header.name else term.then_target
                    t2 = pre if term.else_target == header.name else term.else_target
                    term = CondBr(term.cond, t1, term.then_args, t2, term.else_args)
                if term is not b.term:
                    b = Block(b.name, b.params, b.instrs, term)
            blocks.append(b)
        report.note(f.name, f"hoisted {len(plans)} guard(s) out of loop at {loop.header}")
        report.rewrites += len(plans)
        return Function(f.name, f.params, tuple(blocks))
    return None


def guard_motion(p: Program) -> tuple[Program, PassReport]:
    report = PassReport("guard_motion", before_instrs=program_instr_count(p))
    fns = list(p.functions)
    for n, f in enumerate(fns):
        skipped: set[str] = set()
        changed = True
        while changed:
            nf = _hoist_one(fns[n], report, skipped)
            changed = nf is not None
            if nf is not None:
                fns[n] = nf
        if fns[n] is not f:
            fns[n] = remove_dead_pure(fns[n])
    new_p = replace(p, functions=tuple(fns))
    if report.rewrites == 0:
        new_p = p
    report.after_instrs = program_instr_count(new_p)
    return new_p, report
