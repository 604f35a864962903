"""Discrete Monge-Ampere measures of mesh functions on convex lattice domains."""

from .envelope import LowerHull, gamma_eval, gamma_extension_eval, lower_hull
from .laplace import barrier_constants, solve_dirichlet
from .lattice import Ball, Box, DirectionSet, LatticeDomain, Polygon, build_domain
from .measure import DensitySpec, abp_check, discrete_measure, ma_weight, measure_of_region, oberman_operator, total_mass
from .meshfn import MeshFunction, delta_e, is_discrete_convex, sample
from .subdiff import discrete_subdifferential, equivalence_check, hull_normal_cell

__all__ = [
    "Ball",
    "Box",
    "DensitySpec",
    "DirectionSet",
    "LatticeDomain",
    "LowerHull",
    "MeshFunction",
    "Polygon",
    "abp_check",
    "barrier_constants",
    "build_domain",
    "delta_e",
    "discrete_measure",
    "discrete_subdifferential",
    "equivalence_check",
    "gamma_eval",
    "gamma_extension_eval",
    "hull_normal_cell",
    "is_discrete_convex",
    "lower_hull",
    "ma_weight",
    "measure_of_region",
    "oberman_operator",
    "sample",
    "solve_dirichlet",
    "total_mass",
]
