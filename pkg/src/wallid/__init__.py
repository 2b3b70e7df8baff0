"""Conductivity identification for multilayer walls from in-wall temperature sensors.

The package couples a Dufort-Frankel heat conduction solver with direct
sensitivity equations, a D-optimal search for the most informative
measurement window and a switching hybrid optimizer for the weighted
least-squares estimate of the conductivity profile.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .exceptions import (ConfigError, CoverageError, DivergenceError, DomainError, EstimationError,
                         InvalidParameterError, NumericalError, WallIDError)
from .wall_model import (KINDS, LINEAR, PIECEWISE, QUADRATIC, CapacityModel, ConductivityModel, Layer,
                         ReferenceScales, SensorArray, WallSpec, apriori_model, identifiable_mask,
                         nondimensionalize)
from .heat_solver import BoundarySeries, SolutionGrid, SpaceGrid, WallProblem, simulate
from .sensitivity import fd_sensitivity_oracle, solve_sensitivities
from .oed import FisherMatrix, MeasurementPlan, d_criterion, fisher_matrix, scan_windows
from .optimize import OptimizerConfig, hybrid_optimize
from .estimation import (EstimationReport, ObservationSet, UncertaintyModel, WindowCost, cost, estimate,
                         propagate_uncertainty, residual_analysis)
from .twin import SyntheticTwinSpec, generate_twin

__all__ = [
    "__version__", "ConfigError", "CoverageError", "DivergenceError", "DomainError", "EstimationError",
    "InvalidParameterError", "NumericalError", "WallIDError", "KINDS", "LINEAR", "PIECEWISE",
    "QUADRATIC", "CapacityModel", "ConductivityModel", "Layer", "ReferenceScales", "SensorArray",
    "WallSpec", "apriori_model", "identifiable_mask", "nondimensionalize", "BoundarySeries",
    "SolutionGrid", "SpaceGrid", "WallProblem", "simulate", "fd_sensitivity_oracle",
    "solve_sensitivities", "FisherMatrix", "MeasurementPlan", "d_criterion", "fisher_matrix",
    "scan_windows", "OptimizerConfig", "hybrid_optimize", "EstimationReport", "ObservationSet",
    "UncertaintyModel", "WindowCost", "cost", "estimate", "propagate_uncertainty",
    "residual_analysis", "SyntheticTwinSpec", "generate_twin", "ConductivityEstimator",
    "WindowSelector",
]


def __getattr__(name):
    # the scikit-learn wrappers are imported on first use to keep startup light
    if name in ("ConductivityEstimator", "WindowSelector"):
        from . import estimators
        return getattr(estimators, name)
    raise AttributeError(f"module 'wallid' has no attribute {name!r}")
