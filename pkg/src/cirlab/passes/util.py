"""Shared rewrite helpers for the optimization passes."""

from __future__ import annotations

from collections import Counter

from ..ir import PURE_OPS, Block, Function, Instr, Program


def use_counts(f: Function) -> Counter:
    uses: Counter = Counter()
    for b in f.blocks:
        for i in b.instrs:
            uses.update(i.uses())
        uses.update(b.term.uses())
    return uses


def def_index(f: Function) -> dict[str, Instr]:
    out: dict[str, Instr] = {}
    for b in f.blocks:
        for i in b.instrs:
            if i.dest is not None:
                out[i.dest] = i
    return out


def remove_dead_pure(f: Function) -> Function:
    """Delete side-effect-free instructions whose results are never used."""
    while True:
        uses = use_counts(f)
        blocks = []
        removed = 0
        for b in f.blocks:
            kept = tuple(
                i
                for i in b.instrs
                if not (i.op in PURE_OPS and i.dest is not None and uses[i.dest] == 0)
            )
            removed += len(b.instrs) - len(kept)
            blocks.append(Block(b.name, b.params, kept, b.term) if kept != b.instrs else b)
        if removed == 0:
            return f
        f = Function(f.name, f.params, tuple(blocks))


def program_instr_count(p: Program) -> int:
    return sum(f.instr_count() for f in p.functions)


def static_op_count(p: Program, op: str) -> int:
    return sum(1 for f in p.functions for b in f.blocks for i in b.instrs if i.op == op)
