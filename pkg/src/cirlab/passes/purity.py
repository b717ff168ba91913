"""Conservative syntactic purity and blocking-freedom for functions.

A pure function computes only over its arguments: constants, arithmetic,
comparisons, instanceof, and calls to functions already proved pure. Any
heap access, allocation, concurrency primitive, output, guard, or virtual /
handle call makes it impure. The analysis is a greatest fixpoint over the
call graph, so mutually recursive pure helpers are accepted.
"""

from __future__ import annotations

from ..ir import Function, Program

_PURE_INSTRS = frozenset({"const", "binop", "instanceof"})

#: ops that may block, synchronize, or dispatch to unknown code
_BLOCKING = frozenset(
    {"monitorenter", "monitorexit", "wait", "notify", "notifyall", "park", "unpark",
     "callvirtual", "callhandle"}
)


def _fix(p: Program, candidate) -> frozenset[str]:
    ok = {f.name for f in p.functions}
    changed = True
    while changed:
        changed = False
        for f in p.functions:
            if f.name in ok and not candidate(f, ok):
                ok.discard(f.name)
                changed = True
    return frozenset(ok)


def pure_functions(p: Program) -> frozenset[str]:
    def candidate(f: Function, ok: set[str]) -> bool:
        for b in f.blocks:
            for i in b.instrs:
                if i.op == "call":
                    if i.fn not in ok:
                        return False
                elif i.op not in _PURE_INSTRS:
                    return False
        return True

    return _fix(p, candidate)


def blocking_free_functions(p: Program) -> frozenset[str]:
    """Functions that can never touch a monitor, wait, notify, or park."""

    def candidate(f: Function, ok: set[str]) -> bool:
        for b in f.blocks:
            for i in b.instrs:
                if i.op in _BLOCKING:
                    return False
                if i.op == "call" and i.fn not in ok:
                    return False
        return True

    return _fix(p, candidate)
