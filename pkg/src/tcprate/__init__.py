"""Long-term send rate of NewReno TCP under i.i.d. random packet drops."""

from .analytic_laws import Law, LawResult, linear_law, linear_law_sat, linear_law_unsat, sqrt_law
from .core_path import TABLE1, PathSpec, TcpConfig, ValidationError, classify_regime, derive_path
from .full_model import ModelBreakdown, assemble
from .window_dist import WindowDistribution, solve_window_distribution

__version__ = "0.1.0"

__all__ = [
    "TABLE1",
    "Law",
    "LawResult",
    "ModelBreakdown",
    "PathSpec",
    "TcpConfig",
    "ValidationError",
    "WindowDistribution",
    "assemble",
    "classify_regime",
    "derive_path",
    "linear_law",
    "linear_law_sat",
    "linear_law_unsat",
    "solve_window_distribution",
    "sqrt_law",
]
