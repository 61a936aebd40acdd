"""Finite-element spectral toolkit for the Laplacian with mixed Dirichlet-Neumann conditions.

The boundary of a planar domain is split into GAMMA (Neumann part for the
problem whose first eigenfunction is ``psi_1``) and GAMMA_C (its Dirichlet
part).  The package computes both mixed spectra, the spectrum of the
associated vector-field form, a discrete Helmholtz-type decomposition, and
checks the predicted eigenvalue inequality, monotonicity and hot-spot
location.
"""
from .geometry import (
    Arc,
    DomainFile,
    DomainSpec,
    GeometryError,
    HypothesisReport,
    Label,
    boundary_frame,
    check_hypotheses,
    disk,
    find_rotation,
    hotspot_corner,
    interior_angle,
    parse_domain,
    polygon,
    read_domain_file,
)
from .mesh import Mesh, MeshError, export_triangle, export_vtk, import_mesh, read_vtk, refine, triangulate
from .scalar_fem import (
    AssemblyError,
    KernelPresent,
    ScalarEigenResult,
    assemble_scalar,
    gradient_field,
    hotspot_report,
    monotonicity_report,
    solve_mixed,
    solve_smallest,
)
from .vector_fem import (
    VectorEigenResult,
    assemble_curvature,
    assemble_divcurl,
    build_constraints,
    compare_forms,
    identify_minimizer,
    solve_vector_evp,
)
from .helmholtz import DecompositionResult, decompose, estimate_hc_dim, exact_discrete_orthogonality_check
from .analysis import TheoremReport, convergence_study, run_theorem_suite

__version__ = "0.1.0"

__all__ = [
    "Arc", "DomainFile", "DomainSpec", "GeometryError", "HypothesisReport", "Label",
    "boundary_frame", "check_hypotheses", "find_rotation", "hotspot_corner", "interior_angle",
    "parse_domain", "read_domain_file", "polygon", "disk",
    "Mesh", "MeshError", "export_triangle", "export_vtk", "import_mesh", "read_vtk", "refine", "triangulate",
    "AssemblyError", "KernelPresent", "ScalarEigenResult", "assemble_scalar", "gradient_field",
    "hotspot_report", "monotonicity_report", "solve_mixed", "solve_smallest",
    "VectorEigenResult", "assemble_curvature", "assemble_divcurl", "build_constraints", "compare_forms",
    "identify_minimizer", "solve_vector_evp",
    "DecompositionResult", "decompose", "estimate_hc_dim", "exact_discrete_orthogonality_check",
    "TheoremReport", "convergence_study", "run_theorem_suite",
    "__version__",
]
