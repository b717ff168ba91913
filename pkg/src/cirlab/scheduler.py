"""Exhaustive thread-interleaving exploration and the refinement check.

`enumerate_results` walks every runnable-thread choice depth-first, memoizing
the set of trace suffixes producible from each canonical machine state, so
interleavings that converge on the same state are explored once. The result
is the set R of observable results (output sequence + termination status).

`check_refinement` decides whether a transformed program can only produce
results the original could: every terminated trace of the transformed
program must appear in the original's set. Deopt traces are excluded here;
guard soundness is covered separately by the guard-implication property.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .interp import Machine, ResultTrace
from .ir import Program

#: suffix entry: (events-tuple, status, reason)
_Suffix = tuple[tuple[int, ...], str, str | None]


@dataclass(frozen=True)
class ResultSet:
    """The set R over all schedules; `exhausted` means enumeration completed.

    When `exhausted` is False (step budget or state ceiling hit) any subset
    claim is only "bounded", never proved.
    """

    traces: frozenset[ResultTrace]
    exhausted: bool
    states_explored: int

    def terminated(self) -> frozenset[ResultTrace]:
        return frozenset(t for t in self.traces if t.status == "terminated")


class _Ceiling(Exception):
    pass


class _Explorer:
    def __init__(self, step_budget: int, preemption_bound: int | None,
                 max_states: int, memoize: bool):
        self.budget = step_budget
        self.pbound = preemption_bound
        self.max_states = max_states
        self.memoize = memoize
        self.memo: dict[object, frozenset[_Suffix]] = {}
        self.seen: set[object] = set()

    def explore(self, m: Machine, rem: int, last: int, preempts: int
                ) -> tuple[frozenset[_Suffix], bool]:
        """(suffix set from this state, True iff no path hit the step budget)."""
        if m.status is not None:
            return frozenset({((), m.status, m.reason)}), True
        enabled = m.enabled_threads()
        if not enabled:
            status = "deadlock" if m.alive() else "terminated"
            return frozenset({((), status, None)}), True
        if rem <= 0:
            return frozenset({((), "step-budget-exhausted", None)}), False

        key = None
        if self.memoize:
            key = (m.canon_key(), last, preempts) if self.pbound is not None else m.canon_key()
            hit = self.memo.get(key)
            if hit is not None:
                return hit, True
            if key not in self.seen:
                self.seen.add(key)
                if len(self.seen) > self.max_states:
                    raise _Ceiling()

        choices = enabled
        if self.pbound is not None and last in enabled and preempts >= self.pbound:
            choices = [last]

        out: set[_Suffix] = set()
        complete = True
        for tid in choices:
            child = m.clone()
            emitted = tuple(child.step(tid))
            p2 = preempts
            if self.pbound is not None and last != 0 and tid != last and last in enabled:
                p2 += 1
            suffixes, ok = self.explore(child, rem - 1, tid, p2)
            complete = complete and ok
            for ev, status, reason in suffixes:
                out.add((emitted + ev, status, reason))
        result = frozenset(out)
        if self.memoize and complete and key is not None:
            self.memo[key] = result
        return result, complete


def enumerate_results(
    program: Program,
    step_budget: int = 10_000,
    preemption_bound: int | None = None,
    max_states: int = 2_000_000,
    memoize: bool = True,
) -> ResultSet:
    """Compute R(program) by DFS over all schedules, up to the given bounds."""
    if len(program.threads) > 4:
        raise ValueError("enumeration supports at most 4 threads")
    ex = _Explorer(step_budget, preemption_bound, max_states, memoize)
    m = Machine(program)
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, step_budget + 500))
    try:
        suffixes, complete = ex.explore(m, step_budget, 0, 0)
    except _Ceiling:
        suffixes, complete = frozenset(), False
    finally:
        sys.setrecursionlimit(old_limit)
    traces = frozenset(ResultTrace(ev, status, reason) for ev, status, reason in suffixes)
    return ResultSet(traces, complete, len(ex.seen) if memoize else -1)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a refinement check.

    kind is "refines" (proved under full enumeration), "bounded-ok" (no
    violation found, but one side was not exhaustively enumerated), or
    "violates" (witness holds a transformed-program trace the original
    cannot produce).
    """

    kind: str
    witness: ResultTrace | None = None
    states_explored: int = 0
    original: ResultSet | None = None
    transformed: ResultSet | None = None


def check_refinement(
    original: Program,
    transformed: Program,
    step_budget: int = 10_000,
    preemption_bound: int | None = None,
    max_states: int = 2_000_000,
) -> Verdict:
    """Check that every terminated result of `transformed` is one of `original`'s."""
    r_orig = enumerate_results(original, step_budget, preemption_bound, max_states)
    r_new = enumerate_results(transformed, step_budget, preemption_bound, max_states)
    states = r_orig.states_explored + r_new.states_explored
    allowed = r_orig.traces
    for t in sorted(r_new.terminated(), key=lambda t: (t.events, t.status)):
        if t not in allowed:
            return Verdict("violates", t, states, r_orig, r_new)
    if r_orig.exhausted and r_new.exhausted:
        return Verdict("refines", None, states, r_orig, r_new)
    return Verdict("bounded-ok", None, states, r_orig, r_new)
