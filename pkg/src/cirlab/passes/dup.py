"""Dominance-based duplication: copy merge-block code into predecessors
when a check in the merge is already decided by a dominating branch.

For each merge block, every predecessor collects the branch facts that hold
on its incoming path (boolean names known true/false, and instanceof tests
it is dominated by). The merge is duplicated into the predecessors only if
at least one check dies in at least one copy (the benefit gate): a decided
instanceof becomes a boolean constant and a decided conditional branch
becomes a direct jump. Copies where nothing is known keep the check.
"""

from __future__ import annotations

from dataclasses import replace

from .. import ir
from ..cfg import dominates, dominators, predecessors, reachable_rpo
from ..ir import Block, Br, CondBr, Function, NameGen, Program
from . import PassReport
from .util import def_index, program_instr_count, remove_dead_pure

_MAX_ROUNDS = 20


def _edge_facts(f: Function, idom, preds, defs, pred: str
                ) -> tuple[dict[str, bool], dict[tuple, bool]]:
    """Facts holding at `pred`: boolean names and (operand, class) instanceof keys.

    A branch fact is only sound when every arrival at `pred` comes through
    the branch edge itself: the taken target must dominate `pred` AND have
    the branching block as its unique predecessor (edge dominance), else a
    side entry into the target could reach `pred` after the other arm ran
    last.
    """
    name_facts: dict[str, bool] = {}
    inst_facts: dict[tuple, bool] = {}
    bmap = f.block_map()
    cur = pred
    while cur is not None:
        b = bmap[cur]
        t = b.term
        if isinstance(t, CondBr) and t.then_target != t.else_target:
            for target, val in ((t.then_target, True), (t.else_target, False)):
                if preds[target] == [cur] and dominates(idom, target, pred):
                    name_facts.setdefault(t.cond, val)
                    d = defs.get(t.cond)
                    if d is not None and d.op == "instanceof":
                        inst_facts.setdefault((d.args[0], d.cls), val)
        cur = idom.get(cur)
    return name_facts, inst_facts


def _fold_count(block: Block, subst: dict[str, str],
                name_facts: dict[str, bool], inst_facts: dict[tuple, bool]) -> int:
    """How many checks would die if `block` were duplicated under these facts."""
    known = dict(name_facts)
    count = 0
    for i in block.instrs:
        if i.op == "instanceof":
            operand = subst.get(i.args[0], i.args[0])
            if (operand, i.cls) in inst_facts:
                known[i.dest] = inst_facts[(operand, i.cls)]
                count += 1
    t = block.term
    if isinstance(t, CondBr):
        cond = subst.get(t.cond, t.cond)
        if cond in known or t.cond in known:
            count += 1
    return count


def _duplicate(f: Function, merge: Block, pred_name: str, subst: dict[str, str],
               name_facts, inst_facts, gen: NameGen) -> Block:
    bmap = f.block_map()
    pred = bmap[pred_name]
    rename = dict(subst)
    known: dict[str, bool] = {}
    for name, val in name_facts.items():
        known[name] = val
    instrs = list(pred.instrs)
    for i in merge.instrs:
        renamed = i.rename(rename)
        if i.dest is not None:
            rename[i.dest] = gen.fresh(i.dest)
            renamed = replace(renamed, dest=rename[i.dest])
        if renamed.op == "instanceof" and (renamed.args[0], renamed.cls) in inst_facts:
            verdict = inst_facts[(renamed.args[0], renamed.cls)]
            renamed = ir.const(rename[i.dest], verdict)
            known[rename[i.dest]] = verdict
        instrs.append(renamed)
    term = merge.term.rename(rename)
    if isinstance(term, CondBr) and term.cond in known:
        term = (
            Br(term.then_target, term.then_args)
            if known[term.cond]
            else Br(term.else_target, term.else_args)
        )
    return Block(pred.name, pred.params, tuple(instrs), term)


def _prune_unreachable(f: Function) -> Function:
    live = set(reachable_rpo(f))
    return Function(f.name, f.params, tuple(b for b in f.blocks if b.name in live))


def _dup_once(f: Function, report: PassReport) -> Function | None:
    idom, _ = dominators(f)
    preds = predecessors(f)
    defs = def_index(f)
    bmap = f.block_map()
    for name in reachable_rpo(f):
        merge = bmap[name]
        ps = preds[name]
        if len(ps) < 2 or name == f.entry.name:
            continue
        if any(dominates(idom, name, q) for q in ps):
            continue  # loop header: duplicating would rewrite the backedge
        if not all(isinstance(bmap[q].term, Br) for q in ps):
            continue
        facts = {}
        total = 0
        for q in ps:
            nf, inf = _edge_facts(f, idom, preds, defs, q)
            subst = dict(zip(merge.params, bmap[q].term.args))
            facts[q] = (nf, inf, subst)
            total += _fold_count(merge, subst, nf, inf)
        if total == 0:
            continue
        gen = NameGen(f.defined_names() | {b.name for b in f.blocks})
        new_blocks = []
        for b in f.blocks:
            if b.name in ps:
                nf, inf, subst = facts[b.name]
                new_blocks.append(_duplicate(f, merge, b.name, subst, nf, inf, gen))
            else:
                new_blocks.append(b)
        nf2 = _prune_unreachable(Function(f.name, f.params, tuple(new_blocks)))
        report.note(f.name, f"duplicated merge {name} into {len(ps)} predecessor(s), "
                            f"eliminated {total} check(s)")
        report.rewrites += total
        return nf2
    return None


def dup_simulate(p: Program) -> tuple[Program, PassReport]:
    report = PassReport("dup_simulate", before_instrs=program_instr_count(p))
    fns = list(p.functions)
    for n in range(len(fns)):
        before = fns[n]
        for _ in range(_MAX_ROUNDS):
            nf = _dup_once(fns[n], report)
            if nf is None:
                break
            fns[n] = nf
        if fns[n] is not before:
            fns[n] = remove_dead_pure(fns[n])
    new_p = replace(p, functions=tuple(fns))
    if report.rewrites == 0:
        new_p = p
    report.after_instrs = program_instr_count(new_p)
    return new_p, report
