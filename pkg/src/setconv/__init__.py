"""Set-convergence, epi-distance and graphical-convergence diagnostics at sampled scale."""

from .errors import DimensionMismatch, NumericalFailure, SetConvError, ValidationError
from .geometry import (Ball, NormSpec, PointCloud, excess, point_to_set_distance, truncate, truncated_hausdorff,
                       truncated_hausdorff_detail)
from .fields import GridSpec, ScalarField, field_from_json
from .limits import SetSequence, inner_limit_estimate, outer_limit_estimate, set_convergence_report
from .epi import epi_distance, epi_distance_cloud, epi_distance_kenmochi, minima_bounds_report, sample_epigraph
from .geneq import SetValuedMap, graph_distance, near_solution_check, preimage
from .solvers import homotopy_solve, normal_map_residual, smooth_plus, solve_cp_smoothed

__version__ = "0.1.0"

__all__ = [
    "Ball", "DimensionMismatch", "GridSpec", "NormSpec", "NumericalFailure", "PointCloud", "ScalarField",
    "SetConvError", "SetSequence", "SetValuedMap", "ValidationError", "epi_distance", "epi_distance_cloud",
    "epi_distance_kenmochi", "excess", "field_from_json", "graph_distance", "homotopy_solve",
    "inner_limit_estimate", "minima_bounds_report", "near_solution_check", "normal_map_residual",
    "outer_limit_estimate", "point_to_set_distance", "preimage", "sample_epigraph", "set_convergence_report",
    "smooth_plus", "solve_cp_smoothed", "truncate", "truncated_hausdorff", "truncated_hausdorff_detail",
]
