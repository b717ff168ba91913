"""cirlab: a concurrency-aware JIT-optimization laboratory.

The package defines a miniature concurrent object-oriented IR, an
interpreter that profiles dynamic workload metrics, an exhaustive schedule
enumerator with a result-set refinement checker, seven optimization passes,
and the supporting measurement toolkit (PCA over metric matrices, CK class
metrics, Welch/Winsorize statistics, and a benchmark harness).
"""

from .interp import run
from .ir import Program, print_program
from .parser import parse
from .passes import PASS_NAMES, PassOptions, pipeline, run_pass
from .scheduler import check_refinement, enumerate_results
from .validate import validate

__all__ = [
    "PASS_NAMES",
    "PassOptions",
    "Program",
    "check_refinement",
    "enumerate_results",
    "parse",
    "pipeline",
    "print_program",
    "run",
    "run_pass",
    "validate",
]
__version__ = "0.1.0"
