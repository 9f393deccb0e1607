"""Monte Carlo laboratory for decoupled forward-backward SDEs with jumps and
their comparison theorems."""

__version__ = "0.1.0"

from .backward import (  # noqa: E402
    BackwardSolution, closed_form_oracle, feynman_kac_u, feynman_kac_z, solve_backward,
    value_function,
)
from .comparison import (  # noqa: E402
    ComparisonReport, MCParams, run_comparison, run_converse_experiment, run_strict_comparison,
    scan_generator_gap,
)
from .model import (  # noqa: E402
    ForwardModel, GeneratorSpec, JumpMeasureSpec, StoppingRule, TerminalSpec, TimeGrid,
    validate_model,
)
from .paths import PathBundle, hitting_time, sample_jump_events, simulate_paths  # noqa: E402
from .regression import RegressionBasis  # noqa: E402

__all__ = [
    "BackwardSolution", "ComparisonReport", "ForwardModel", "GeneratorSpec", "JumpMeasureSpec",
    "MCParams", "PathBundle", "RegressionBasis", "StoppingRule", "TerminalSpec", "TimeGrid",
    "closed_form_oracle", "feynman_kac_u", "feynman_kac_z", "hitting_time", "run_comparison",
    "run_converse_experiment", "run_strict_comparison", "sample_jump_events", "scan_generator_gap",
    "simulate_paths", "solve_backward", "validate_model", "value_function",
]
