"""Attrition and resilience models for networks of officials under harassment."""

from .attrition import DynamicsParams, Trajectory, limit_fraction, simulate, sweep_pinf
from .distributions import (
    EmpiricalAtoms,
    Exponential,
    PiecewiseLinearCdf,
    ThresholdDistribution,
    UniformInterval,
    from_spec,
)
from .resilience import ResilienceReport, closed_form_resilience, resilience_combined

__version__ = "0.1.0"

__all__ = [
    "DynamicsParams",
    "Trajectory",
    "limit_fraction",
    "simulate",
    "sweep_pinf",
    "EmpiricalAtoms",
    "Exponential",
    "PiecewiseLinearCdf",
    "ThresholdDistribution",
    "UniformInterval",
    "from_spec",
    "ResilienceReport",
    "closed_form_resilience",
    "resilience_combined",
]
