"""propsim: deterministic propping-up dynamics for a constant-exposure fund.

A fund holding vega exposure at a fixed fraction of its capital trades each
period to replace expiring exposure; its own market impact marks up the book
it still holds. This package simulates the resulting capital dynamics,
classifies trajectories (bubbles, gaps, unbounded growth), locates the
critical capital at which the map degenerates, and exposes everything via a
CLI and a small HTTP service.
"""

from .dynamics import (
    CriticalCapital,
    DegenerateDenominatorError,
    FundState,
    Guards,
    ImpactModel,
    MaturityCollapseError,
    ModelParams,
    NoRootFoundError,
    RangeError,
    RealizedPath,
    Scenario,
    StepBreakdown,
    Termination,
    Trajectory,
    UndefinedCriticalError,
    critical_capital,
    degeneracy_margin,
    simulate,
    solve_profit_linear,
    solve_profit_sqrt,
    sqrt_impact_residual,
    step,
    step_closed_form,
)
from .regimes import (
    CellSummary,
    GapEvent,
    InvalidAxisError,
    LyapunovEstimate,
    ParameterAxis,
    PeakEvent,
    Regime,
    RegimeMap,
    RegimeReport,
    classify,
    detect_gaps,
    find_peaks,
    lyapunov_estimate,
    report_to_dict,
    sweep,
)
from .scenario_io import (
    SchemaError,
    parse_scenario,
    parse_trajectory_csv,
    render_capital_svg,
    scenario_from_dict,
    scenario_to_dict,
    scenario_to_json,
    serialize_trajectory_csv,
)

__version__ = "0.1.0"

__all__ = [
    "CriticalCapital",
    "DegenerateDenominatorError",
    "FundState",
    "Guards",
    "ImpactModel",
    "MaturityCollapseError",
    "ModelParams",
    "NoRootFoundError",
    "RangeError",
    "RealizedPath",
    "Scenario",
    "StepBreakdown",
    "Termination",
    "Trajectory",
    "UndefinedCriticalError",
    "critical_capital",
    "degeneracy_margin",
    "simulate",
    "solve_profit_linear",
    "solve_profit_sqrt",
    "sqrt_impact_residual",
    "step",
    "step_closed_form",
    "CellSummary",
    "GapEvent",
    "InvalidAxisError",
    "LyapunovEstimate",
    "ParameterAxis",
    "PeakEvent",
    "Regime",
    "RegimeMap",
    "RegimeReport",
    "classify",
    "detect_gaps",
    "find_peaks",
    "lyapunov_estimate",
    "report_to_dict",
    "sweep",
    "SchemaError",
    "parse_scenario",
    "parse_trajectory_csv",
    "render_capital_svg",
    "scenario_from_dict",
    "scenario_to_dict",
    "scenario_to_json",
    "serialize_trajectory_csv",
    "__version__",
]
