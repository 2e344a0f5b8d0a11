"""Exponential-family dynamics, Koenigs gauges and gauged measure probes."""

from .dynamics import ExpMap, StripKind, StripSpec, Verdict, classify_orbit, inverse_branch
from .errors import (
    BudgetError,
    ConvergenceError,
    DegenerateInput,
    DepthOverflow,
    DomainError,
    EmptyPacking,
    GaugeDynError,
    TooCoarse,
)
from .geometry import Box, build_packing, density
from .koenigs import GaugeFunction, KoenigsEvaluator, phi_eval
from .measure import classify_grid, dichotomy_probe, refine
from .nested import construct, frostman_mass, verify_nesting

__all__ = [
    "BudgetError", "Box", "ConvergenceError", "DegenerateInput", "DepthOverflow",
    "DomainError", "EmptyPacking", "ExpMap", "GaugeDynError", "GaugeFunction",
    "KoenigsEvaluator", "StripKind", "StripSpec", "TooCoarse", "Verdict",
    "build_packing", "classify_grid", "classify_orbit", "construct", "density",
    "dichotomy_probe", "frostman_mass", "inverse_branch", "phi_eval", "refine",
    "verify_nesting",
]
__version__ = "0.1.0"
