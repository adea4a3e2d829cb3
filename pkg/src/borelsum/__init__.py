"""Borel-Laplace summation engine for a singularly perturbed nonlinear Cauchy problem.

Pipeline: equation spec -> formal series in T -> Borel-plane convolution
equation -> root geometry and good covering -> fixed point on rays ->
Laplace and Fourier reconstruction of u_p(t, z, eps) -> verification.
"""

__version__ = "0.1.0"

from .grid_core import GridFunction, MGrid, TauMField, TauRay
from .problem_model import EquationSpec, OperatorTerm, PolynomialSpec, SectorSpec, canonical_spec, validate_structure
from .formal_solver import FormalSeriesT, formal_residual, gevrey_rate, solve_recursion
from .root_geometry import CoveringPlan, build_good_covering, roots_qlm, verify_covering
from .convolution_solver import BorelSolution, fixed_point_solve
from .transforms import SectorSolution, build_solution, laplace_mk
from .verifier import flatness_probe, gevrey_expansion, pde_residual, rs_check

__all__ = [
    "BorelSolution", "CoveringPlan", "EquationSpec", "FormalSeriesT", "GridFunction", "MGrid", "OperatorTerm",
    "PolynomialSpec", "SectorSolution", "SectorSpec", "TauMField", "TauRay", "build_good_covering",
    "build_solution", "canonical_spec", "fixed_point_solve", "flatness_probe", "formal_residual", "gevrey_expansion",
    "gevrey_rate", "laplace_mk", "pde_residual", "roots_qlm", "rs_check", "solve_recursion", "validate_structure",
    "verify_covering",
]
