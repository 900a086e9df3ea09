"""Surrogate-based design optimization toolkit for a twin-rotor VAWT.

Subpackages: design_space (geometry + feasibility), oracle (synthetic torque
coefficient + datasets), gpr and nn (surrogate models), scaling (similarity
and power laws), optimize (constrained search), cli (command line), plots.
"""

__version__ = "0.1.0"

from .design_space import (  # noqa: F401
    DesignPoint,
    DesignSpaceBounds,
    FeasibilityReport,
    check_feasible,
    grid,
    sample_feasible,
)
from .oracle import Dataset, OracleConfig, evaluate, generate_dataset  # noqa: F401
from .gpr import GprModel, KernelParams, Prediction  # noqa: F401
from .nn import MlpConfig, MlpModel, TrainReport  # noqa: F401
from .scaling import (  # noqa: F401
    OperatingPoint,
    PowerLawFit,
    ScalingParams,
    TorqueCurve,
    efficiency,
    fit_power_law,
    rated_power,
    rated_torque_law,
    scale_torque_power,
    similarity_from_speed,
)
from .optimize import OptResult, brute_force, improvement, maximize  # noqa: F401
