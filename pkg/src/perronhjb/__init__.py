"""Optimal control of a structured growth-fragmentation model.

Perron and Floquet eigenvalues of ``G + alpha F``, projected dynamics on the
simplex with its ergodic set, and an upwind HJB solver for the ergodic
control problem.
"""
from .controls import ControlSignal
from .errors import (CFLError, DegenerateSpectrumError, GeometryError, NumericsError,
                     PerronHJBError, UnsupportedSpectrumError, ValidationError)
from .perron import (d2lambda_P, dlambda_P, lambda_P, optimize_perron, perron_curve,
                     spectrum)
from .spectral import ModelParams, build_running_example, eigen_triple, table1

__version__ = "0.1.0"

__all__ = [
    "CFLError", "ControlSignal", "DegenerateSpectrumError", "GeometryError", "ModelParams",
    "NumericsError", "PerronHJBError", "UnsupportedSpectrumError", "ValidationError",
    "build_running_example", "d2lambda_P", "dlambda_P", "eigen_triple", "lambda_P",
    "optimize_perron", "perron_curve", "spectrum", "table1",
]
