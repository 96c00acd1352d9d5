"""Generalised functions on (order, eps) lattices and the cubic heat equation with singular data."""
from .domains import DomainSpec, SpaceTimeGrid, build_cutoff, exhaustion, restrict, trace_boundary, trace_time
from .ibvp import (GeneralizedIBVPSolver, GeneralizedInitialDatum, cutoff_sequence_run, limit_assembly,
                   solve_generalized, uniqueness_probe, verify_apriori)
from .mollifier import InitialDatum, Mollifier, MollifierSpec, build_mollifier, mollify, moment, scaled_eval
from .nets import (EpsilonGrid, FieldNet, NegligibilityPolicy, NetGrids, OrderGrid, ScalarNet, fit_exponent,
                   is_moderate, is_negligible, net_leq, scale_element)
from .solver import SolverConfig, ck_norm, convergence_study, derivative_field, solve_linear, solve_semilinear
from .topology import (MultiIndex, NeighborhoodSpec, boundary_seminorm, cauchy_limit, check_filter_axioms,
                       in_V, in_W, seminorm)

__version__ = "0.1.0"
