"""Optimization passes: pure Program -> (Program, PassReport) rewrites."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class PassReport:
    """What a pass did: total rewrites, per-function notes, and skip reasons.

    rewrites == 0 guarantees the output program is structurally identical to
    the input.
    """

    name: str
    rewrites: int = 0
    details: dict[str, list[str]] = field(default_factory=dict)
    skips: list[tuple[str, str]] = field(default_factory=list)
    before_instrs: int = 0
    after_instrs: int = 0

    def note(self, fn: str, message: str) -> None:
        self.details.setdefault(fn, []).append(message)

    def skip(self, where: str, reason: str) -> None:
        self.skips.append((where, reason))

    def to_dict(self) -> dict:
        return {
            "pass": self.name,
            "rewrites": self.rewrites,
            "details": self.details,
            "skips": [{"where": w, "reason": r} for w, r in self.skips],
            "beforeInstrs": self.before_instrs,
            "afterInstrs": self.after_instrs,
        }


@dataclass(frozen=True)
class PassOptions:
    chunk: int = 32  # lock-coarsening tile size C
    width: int = 4  # vectorization lane count W
    inline_budget: int = 40  # max callee instruction count for inlining


class UnknownPassError(Exception):
    pass


def _registry():
    from .pea import pea_atomic
    from .coarsen import lock_coarsen
    from .coalesce import atomic_coalesce
    from .handles import handle_simplify
    from .guards import guard_motion
    from .vectorize import loop_vectorize
    from .dup import dup_simulate

    return {
        "pea_atomic": lambda p, o: pea_atomic(p),
        "lock_coarsen": lambda p, o: lock_coarsen(p, o.chunk),
        "atomic_coalesce": lambda p, o: atomic_coalesce(p),
        "handle_simplify": lambda p, o: handle_simplify(p, o.inline_budget),
        "guard_motion": lambda p, o: guard_motion(p),
        "loop_vectorize": lambda p, o: loop_vectorize(p, o.width),
        "dup_simulate": lambda p, o: dup_simulate(p),
    }


PASS_NAMES = (
    "pea_atomic", "lock_coarsen", "atomic_coalesce", "handle_simplify",
    "guard_motion", "loop_vectorize", "dup_simulate",
)


def run_pass(program, name: str, options: PassOptions = PassOptions()):
    reg = _registry()
    if name not in reg:
        raise UnknownPassError(f"unknown pass {name!r}; available: {', '.join(PASS_NAMES)}")
    new_p, report = reg[name](program, options)
    if report.rewrites == 0:
        assert new_p == program, f"{name}: zero rewrites but program changed"
    return new_p, report


def pipeline(program, names, options: PassOptions = PassOptions()):
    """Apply passes left to right; returns (program, reports)."""
    reports = []
    for name in names:
        program, report = run_pass(program, name, options)
        reports.append(report)
    return program, reports
