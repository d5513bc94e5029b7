"""Epidemic-model simulation, calibration, and optimal-control toolkit.

Simulates a seven-compartment model with time-varying recovery and
mortality rates, calibrates its parameters to observed case data by
nonlinear least squares, and computes extremal intervention strategies with
a forward-backward sweep solver.
"""

from ._backend import BACKEND_NAME, COMPILED
from .config import RunConfig, build_config, load_preset
from .control import (
    AdjointVec,
    CostWeights,
    FbsmOptions,
    OptimalSolution,
    control_update,
    cost,
    gradient_check,
    hamiltonian,
    solve_fbsm,
)
from .dataio import (
    ObservedSeries,
    aggregate_national,
    parse_regional_csv,
    read_series_csv,
    write_series_csv,
)
from .errors import (
    ConfigError,
    DataFormatError,
    InvalidStateError,
    NonFiniteStateError,
    SeirctlError,
)
from .fit import FitOptions, FitProblem, FitResult, fit
from .metrics import (
    ComparisonTable,
    Improvement,
    TableRow,
    build_table,
    improvement,
    relative_error,
    render_text,
)
from .integrate import TimeGrid, Trajectory, integrate_backward, integrate_forward, interpolate
from .model import (
    ControlBounds,
    ControlVec,
    ModelParams,
    PopulationConstant,
    StateVec,
    mortality_rate,
    recovery_rate,
    rhs_controlled,
    rhs_uncontrolled,
    simulate,
    total_population,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointVec",
    "BACKEND_NAME",
    "COMPILED",
    "ComparisonTable",
    "ConfigError",
    "ControlBounds",
    "ControlVec",
    "CostWeights",
    "DataFormatError",
    "FbsmOptions",
    "FitOptions",
    "FitProblem",
    "FitResult",
    "Improvement",
    "InvalidStateError",
    "ModelParams",
    "NonFiniteStateError",
    "ObservedSeries",
    "OptimalSolution",
    "PopulationConstant",
    "RunConfig",
    "SeirctlError",
    "StateVec",
    "TableRow",
    "TimeGrid",
    "Trajectory",
    "aggregate_national",
    "build_config",
    "build_table",
    "control_update",
    "cost",
    "fit",
    "gradient_check",
    "hamiltonian",
    "improvement",
    "integrate_backward",
    "integrate_forward",
    "interpolate",
    "load_preset",
    "mortality_rate",
    "parse_regional_csv",
    "read_series_csv",
    "recovery_rate",
    "relative_error",
    "render_text",
    "rhs_controlled",
    "rhs_uncontrolled",
    "simulate",
    "solve_fbsm",
    "total_population",
    "write_series_csv",
    "__version__",
]
