"""Control-flow analyses: dominators, natural loops, and a while-loop matcher.

The dominator computation is the classic iterative scheme over a reverse
postorder; unreachable blocks are excluded from the result and reported
alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ir import Block, CondBr, Function, Instr


def predecessors(f: Function) -> dict[str, list[str]]:
    preds: dict[str, list[str]] = {b.name: [] for b in f.blocks}
    for b in f.blocks:
        for t in b.term.targets():
            if t in preds:
                preds[t].append(b.name)
    return preds


def reachable_rpo(f: Function) -> list[str]:
    bmap = f.block_map()
    seen: set[str] = set()
    order: list[str] = []
    stack: list[tuple[str, bool]] = [(f.entry.name, False)]
    while stack:
        name, expanded = stack.pop()
        if expanded:
            order.append(name)
            continue
        if name in seen:
            continue
        seen.add(name)
        stack.append((name, True))
        for t in reversed(bmap[name].term.targets()):
            if t not in seen:
                stack.append((t, False))
    order.reverse()
    return order


def dominators(f: Function) -> tuple[dict[str, str | None], list[str]]:
    """(immediate-dominator map, unreachable block names).

    The entry block maps to None; unreachable blocks are absent from the map.
    """
    order = reachable_rpo(f)
    unreachable = [b.name for b in f.blocks if b.name not in set(order)]
    index = {name: i for i, name in enumerate(order)}
    preds = predecessors(f)
    idom: dict[str, str | None] = {order[0]: None}

    def intersect(a: str, b: str) -> str:
        while a != b:
            while index[a] > index[b]:
                a = idom[a]  # type: ignore[assignment]
            while index[b] > index[a]:
                b = idom[b]  # type: ignore[assignment]
        return a

    changed = True
    while changed:
        changed = False
        for name in order[1:]:
            new_idom = None
            for p in preds[name]:
                if p in idom:
                    new_idom = p if new_idom is None else intersect(p, new_idom)
            if new_idom is not None and idom.get(name) != new_idom:
                idom[name] = new_idom
                changed = True
    idom[order[0]] = None
    return idom, unreachable


def dominates(idom: dict[str, str | None], a: str, b: str) -> bool:
    """True iff block `a` dominates block `b` (reflexive)."""
    cur: str | None = b
    while cur is not None:
        if cur == a:
            return True
        cur = idom.get(cur)
    return False


@dataclass(frozen=True)
class Loop:
    header: str
    latches: tuple[str, ...]  # in-loop blocks with an edge back to the header
    blocks: frozenset[str]


def natural_loops(f: Function) -> list[Loop]:
    idom, _ = dominators(f)
    bmap = f.block_map()
    preds = predecessors(f)
    by_header: dict[str, set[str]] = {}
    latches: dict[str, set[str]] = {}
    for b in f.blocks:
        if b.name not in idom:
            continue
        for t in b.term.targets():
            if t in idom and dominates(idom, t, b.name):
                body = {t}
                stack = [b.name]
                while stack:
                    n = stack.pop()
                    if n in body:
                        continue
                    body.add(n)
                    stack.extend(q for q in preds[n] if q in idom)
                by_header.setdefault(t, set()).update(body)
                latches.setdefault(t, set()).add(b.name)
    return [
        Loop(h, tuple(sorted(latches[h])), frozenset(body))
        for h, body in sorted(by_header.items())
    ]


@dataclass(frozen=True)
class WhileLoop:
    """A loop in canonical while shape.

    The header evaluates straight-line instructions ending in a condbr whose
    then-edge stays in the loop and whose else-edge leaves it; one latch
    branches back to the header.
    """

    loop: Loop
    header: Block
    cond: str
    body_target: str
    body_args: tuple[str, ...]
    exit_target: str
    exit_args: tuple[str, ...]
    latch: str
    entry_preds: tuple[str, ...]  # out-of-loop predecessors of the header


def match_while_loop(f: Function, loop: Loop) -> WhileLoop | None:
    bmap = f.block_map()
    header = bmap[loop.header]
    if not isinstance(header.term, CondBr):
        return None
    t = header.term
    if t.then_target in loop.blocks and t.else_target not in loop.blocks:
        body_target, body_args = t.then_target, t.then_args
        exit_target, exit_args = t.else_target, t.else_args
    else:
        return None
    if len(loop.latches) != 1:
        return None
    preds = predecessors(f)
    entry_preds = tuple(sorted(p for p in preds[loop.header] if p not in loop.blocks))
    return WhileLoop(
        loop, header, t.cond, body_target, body_args, exit_target, exit_args,
        loop.latches[0], entry_preds,
    )


def iv_aliases(f: Function, loop_blocks: frozenset[str], header: str, iv_param: str) -> set[str]:
    """Block params inside the loop that always carry the current IV value.

    Edges into the header cross the iteration boundary, so header params are
    never derived; everything else in the loop runs once per iteration.
    """
    from .ir import Br

    aliases = {iv_param}
    bmap = f.block_map()
    changed = True
    while changed:
        changed = False
        incoming: dict[tuple[str, int], set[str]] = {}
        for b in f.blocks:
            edges = []
            if isinstance(b.term, Br):
                edges.append((b.term.target, b.term.args))
            elif isinstance(b.term, CondBr):
                edges.append((b.term.then_target, b.term.then_args))
                edges.append((b.term.else_target, b.term.else_args))
            for target, args in edges:
                if target in loop_blocks and target != header:
                    for pos, a in enumerate(args):
                        incoming.setdefault((target, pos), set()).add(a)
        for (target, pos), sources in incoming.items():
            param = bmap[target].params[pos]
            if param not in aliases and sources <= aliases:
                aliases.add(param)
                changed = True
    return aliases


@dataclass(frozen=True)
class InductionVar:
    """Header parameter stepped by +1 through the latch, bounded by the header cond."""

    param: str
    limit: str  # loop-invariant bound value
    cmp: str  # "lt" or "le": loop runs while param <cmp> limit
    init_args: dict[str, str]  # entry pred -> initial value name
    aliases: frozenset[str]  # in-loop copies of the current IV value


def find_induction_var(f: Function, wl: WhileLoop) -> InductionVar | None:
    header = wl.header
    cond_def = next((i for i in header.instrs if i.dest == wl.cond), None)
    if cond_def is None or cond_def.op != "binop" or cond_def.kind not in ("lt", "le"):
        return None
    iv, limit = cond_def.args
    if iv not in header.params:
        return None
    if _defined_in(f, limit, wl.loop.blocks):
        return None
    # the latch must feed the parameter back as <current value> + 1
    bmap = f.block_map()
    latch = bmap[wl.latch]
    if latch.term.targets() != (wl.header.name,):
        return None
    aliases = iv_aliases(f, wl.loop.blocks, wl.header.name, iv)
    pos = header.params.index(iv)
    back = latch.term.args[pos]  # type: ignore[union-attr]
    defs = _def_index(f)
    inc = defs.get(back)
    if inc is None or inc.op != "binop" or inc.kind != "add":
        return None
    a, b = inc.args
    one = defs.get(b)
    if a not in aliases or one is None or one.op != "const" or one.value != 1:
        return None
    init_args = {}
    for p in wl.entry_preds:
        term = bmap[p].term
        if isinstance(term, CondBr):
            args = term.then_args if term.then_target == header.name else term.else_args
        elif hasattr(term, "args"):
            args = term.args
        else:
            return None
        init_args[p] = args[pos]
    return InductionVar(iv, limit, cond_def.kind, init_args, frozenset(aliases))


def _def_index(f: Function) -> dict[str, Instr]:
    out: dict[str, Instr] = {}
    for b in f.blocks:
        for i in b.instrs:
            if i.dest is not None:
                out[i.dest] = i
    return out


def _defined_in(f: Function, name: str, blocks: frozenset[str]) -> bool:
    for b in f.blocks:
        if b.name not in blocks:
            continue
        if name in b.params:
            return True
        if any(i.dest == name for i in b.instrs):
            return True
    return False


def monitor_balance(f: Function) -> list[str]:
    """Problems with monitorenter/monitorexit nesting depth along paths.

    Propagates the total lock depth through the CFG and reports blocks whose
    predecessors disagree, paths that go negative, and returns at depth > 0.
    """
    problems: list[str] = []
    depth_in: dict[str, int] = {f.entry.name: 0}
    bmap = f.block_map()
    work = [f.entry.name]
    while work:
        name = work.pop()
        d = depth_in[name]
        b = bmap[name]
        for i in b.instrs:
            if i.op == "monitorenter":
                d += 1
            elif i.op == "monitorexit":
                d -= 1
                if d < 0:
                    problems.append(f"{f.name}/{name}: monitorexit without matching enter")
                    d = 0
        if not b.term.targets() and d != 0:
            problems.append(f"{f.name}/{name}: returns while holding {d} monitor(s)")
        for t in b.term.targets():
            if t in depth_in:
                if depth_in[t] != d:
                    problems.append(f"{f.name}/{t}: inconsistent monitor depth at merge")
            else:
                depth_in[t] = d
                work.append(t)
    return problems
