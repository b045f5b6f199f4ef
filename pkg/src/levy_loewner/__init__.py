"""Loewner hulls driven by Lévy processes on the unit circle.

Modules
-------
driver
    Driving processes: compound Poisson with Poisson-kernel, beta-mixture and
    heat-kernel jumps, plus Cauchy and Brownian grid processes.
conformal
    Exact slit maps and their compositions (slit chains).
loewner
    Forward/backward Loewner flows, whole-plane approximation, Grönwall bound.
hull
    Boundary tracing and geometric estimators.
stats
    Ensembles and statistical checks.
io, cli
    Persistence, rendering and the command line.
"""
__version__ = "0.1.0"

from .driver import (DriverPath, DriverSpec, JumpModel, make_rng, reverse_path, sample_path,
                     sample_values, theoretical_coefficient, empirical_coefficient)
from .conformal import (SlitChain, capacity_factor, chain_eval, chain_deriv, chain_from_path,
                        sample_chain, slit_length_from_capacity, slit_map)
from .loewner import backward_flow, continuity_bound, forward_flow, whole_plane_approx
from .hull import (HullBoundary, arc_length, boundary_length_series, box_counting_dimension,
                   cone_test, diameter, hausdorff_distance, rescale, trace_boundary)
from .stats import ecf_test, limit_test, reversal_test, run_ensemble, simulate

__all__ = [
    "DriverPath", "DriverSpec", "JumpModel", "make_rng", "reverse_path", "sample_path",
    "sample_values", "theoretical_coefficient", "empirical_coefficient",
    "SlitChain", "capacity_factor", "chain_eval", "chain_deriv", "chain_from_path",
    "sample_chain", "slit_length_from_capacity", "slit_map",
    "backward_flow", "continuity_bound", "forward_flow", "whole_plane_approx",
    "HullBoundary", "arc_length", "boundary_length_series", "box_counting_dimension",
    "cone_test", "diameter", "hausdorff_distance", "rescale", "trace_boundary",
    "ecf_test", "limit_test", "reversal_test", "run_ensemble", "simulate",
]
