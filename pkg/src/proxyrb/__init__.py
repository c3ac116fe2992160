"""Coarse-proxy reduced basis method for parameterized dense integral
equations: cheap coarse solves rank the parameter space, column-pivoted QR
picks skeleton parameters, and sampled-entry least squares interpolates the
projected operators online."""

from .linalg import cpqr_select, least_squares, project_out, truncated_svd
from .offline import ReducedModel, Thresholds, run_offline
from .online import batch_evaluate, reduced_solve
from .oracle import OperatorHandle, ParameterSample, Problem, SampleSpace

__all__ = [
    "cpqr_select",
    "truncated_svd",
    "least_squares",
    "project_out",
    "Thresholds",
    "ReducedModel",
    "run_offline",
    "reduced_solve",
    "batch_evaluate",
    "Problem",
    "OperatorHandle",
    "ParameterSample",
    "SampleSpace",
]

__version__ = "0.1.0"
