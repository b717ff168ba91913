"""Benchmark harness: warm-up/steady-state runs and on/off pass comparison.

"Time" is the interpreter's deterministic cost-unit counter, not wall
clock, so results are exactly reproducible in CI. An iteration is one full
program run under a fixed schedule policy; warm-up iterations are executed
and discarded, steady-state iterations contribute one cost sample each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interp import MetricVector, run
from .ir import Program
from .passes import PassOptions, pipeline
from .pca import MetricMatrix
from .stats import SampleSet, WelchResult, welch_t, winsorize

DEFAULT_WARMUP = 5
DEFAULT_MEASURED = 15

#: metric columns the interpreter can actually produce (cpu/cachemiss cannot)
PROFILED_COLUMNS = tuple(c for c in MetricVector.COLUMNS if c not in ("cpu", "cachemiss"))


def profile_matrix(programs: dict[str, Program], schedule: str = "rr:1",
                   budget: int = 5_000_000) -> MetricMatrix:
    """One steady-state profiling run per program, stacked into a matrix.

    Rows carry "interpreter" provenance; the refcycles column is included
    so the result can be normalized downstream.
    """
    rows, data = [], []
    for name, p in programs.items():
        r = run(p, schedule, budget)
        if r.trace.status != "terminated":
            raise RuntimeError(f"{name}: profiling run ended with {r.trace.status}")
        rows.append(name)
        data.append([float(getattr(r.metrics, c)) for c in PROFILED_COLUMNS]
                    + [float(r.metrics.refcycles)])
    return MetricMatrix(
        tuple(rows), PROFILED_COLUMNS + ("refcycles",),
        np.array(data, dtype=float).reshape(len(rows), len(PROFILED_COLUMNS) + 1),
        tuple("interpreter" for _ in rows),
    )


def bench(
    program: Program,
    warmup: int = DEFAULT_WARMUP,
    measured: int = DEFAULT_MEASURED,
    passes: tuple[str, ...] = (),
    options: PassOptions = PassOptions(),
    schedule: str = "rr:1",
    budget: int = 5_000_000,
    label: str = "",
) -> SampleSet:
    """Cost samples from `measured` steady-state iterations."""
    if warmup < 0 or measured < 1:
        raise ValueError("need warmup >= 0 and measured >= 1")
    if passes:
        program, _ = pipeline(program, list(passes), options)
    samples = []
    for k in range(warmup + measured):
        r = run(program, schedule, budget)
        if r.trace.status != "terminated":
            raise RuntimeError(f"iteration {k}: run ended with {r.trace.status}")
        if k >= warmup:
            samples.append(float(r.metrics.refcycles))
    return SampleSet(tuple(samples), label or ",".join(passes) or "baseline")


@dataclass(frozen=True)
class BenchReport:
    """On/off comparison for one toggled pass.

    Positive impact means the optimization speeds execution up: the cost
    with the pass disabled exceeds the cost with it enabled.
    """

    benchmark: str
    passes_on: tuple[str, ...]
    passes_off: tuple[str, ...]
    on_samples: SampleSet
    off_samples: SampleSet
    impact_pct: float
    welch: WelchResult
    significant: bool  # at alpha = 0.01

    def to_dict(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "passesOn": list(self.passes_on),
            "passesOff": list(self.passes_off),
            "onSamples": list(self.on_samples.values),
            "offSamples": list(self.off_samples.values),
            "impactPct": self.impact_pct,
            "t": self.welch.t,
            "df": self.welch.df,
            "p": self.welch.p,
            "significant": self.significant,
        }


def compare(
    program: Program,
    passes: tuple[str, ...],
    toggle: str,
    warmup: int = DEFAULT_WARMUP,
    measured: int = DEFAULT_MEASURED,
    winsor_fraction: float = 0.0,
    options: PassOptions = PassOptions(),
    schedule: str = "rr:1",
    name: str = "program",
) -> BenchReport:
    """Benchmark `passes` against the same set with `toggle` disabled."""
    if toggle not in passes:
        raise ValueError(f"toggled pass {toggle!r} is not in the pass set")
    off = tuple(q for q in passes if q != toggle)
    on_samples = bench(program, warmup, measured, passes, options, schedule, label="on")
    off_samples = bench(program, warmup, measured, off, options, schedule, label="off")
    on_w = winsorize(on_samples, winsor_fraction)
    off_w = winsorize(off_samples, winsor_fraction)
    on_mean, off_mean = on_w.mean(), off_w.mean()
    impact = (off_mean - on_mean) / on_mean * 100.0
    w = welch_t(off_w, on_w)
    return BenchReport(
        name, passes, off, on_w, off_w, impact, w,
        significant=w.p < 0.01 and impact != 0.0,
    )
