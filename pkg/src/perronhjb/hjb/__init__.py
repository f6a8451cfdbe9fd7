"""Upwind finite-difference solver for the reduced HJB equation on the simplex."""
from .analysis import (Eigenvector, OptimalTrajectory, ParticularSolutionReport, a_prime,
                       contour_lines, extract_eigenvector, feedback_policy, optimal_trajectory,
                       optimality_identity, polyline_distance, subdomain,
                       verify_particular_solution)
from .grid import GridField, SimplexGrid
from .scheme import Scheme, drift_operator, hamiltonian, step_time_dependent
from .solve import COLLAPSE_PROBES, DEFAULT_PROBE, HjbRun, run_discounted, run_time_dependent

__all__ = [
    "COLLAPSE_PROBES", "DEFAULT_PROBE", "Eigenvector", "GridField", "HjbRun", "OptimalTrajectory",
    "ParticularSolutionReport", "Scheme", "SimplexGrid", "a_prime", "contour_lines",
    "drift_operator", "extract_eigenvector", "feedback_policy", "hamiltonian", "optimal_trajectory",
    "optimality_identity", "polyline_distance", "run_discounted", "run_time_dependent",
    "step_time_dependent", "subdomain", "verify_particular_solution",
]
