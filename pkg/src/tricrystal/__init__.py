"""Monte Carlo simulation and numerical verification of a 2D triangular-lattice
crystal with isolated vacancy defects in thermal equilibrium."""

from .version import VERSION as __version__

from .lattice import LatticeTorus
from .potential import PotentialSpec, quadratic, tabulated, tabulated_from_file, validate
from .configuration import (
    Configuration,
    EdgeClass,
    check_constraints,
    classify_edges,
    near_standard_sample,
    present_triangles,
    random_valid_config,
    standard_config,
)
from .energy import Move, energy_delta, energy_gap, hamiltonian
from .sampler import Chain, MoveParams, detailed_balance_audit
from .observables import ObservableRecord, Summary, estimate, measure, symmetry_breaking_scan
from . import geometry, harness

__all__ = [
    "__version__",
    "LatticeTorus",
    "PotentialSpec",
    "quadratic",
    "tabulated",
    "tabulated_from_file",
    "validate",
    "Configuration",
    "EdgeClass",
    "check_constraints",
    "classify_edges",
    "near_standard_sample",
    "present_triangles",
    "random_valid_config",
    "standard_config",
    "Move",
    "energy_delta",
    "energy_gap",
    "hamiltonian",
    "Chain",
    "MoveParams",
    "detailed_balance_audit",
    "ObservableRecord",
    "Summary",
    "estimate",
    "measure",
    "symmetry_breaking_scan",
    "geometry",
    "harness",
]
