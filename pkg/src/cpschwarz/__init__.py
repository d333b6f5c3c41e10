"""Closest point method discretization of (c - Laplace-Beltrami) u = f with
restricted additive Schwarz solvers using Dirichlet or Robin transmission
conditions."""

__version__ = "0.1.0"

from .band import Band, build_band, tube_radius
from .errors import (
    CPSchwarzError, ConfigError, Diverged, SingularLocal, SingularMatrix, StencilIncomplete,
    TubeTooWide,
)
from .geometry import Circle, Sphere, Torus, TriMesh, closest_point, load_mesh, make_surface
from .kernels import BACKEND
from .linalg import Factorization, SolveReport, gmres, lu_factor
from .operators import (
    GlobalOperators, assemble_extension, assemble_helmholtz, assemble_laplacian,
    assemble_operators, sample_rhs,
)
from .partition import DisjointPartition, build_graph, import_partition, partition_band
from .schwarz import (
    BlockJacobi, SchwarzPreconditioner, apply_schwarz_preconditioner, block_jacobi_baseline,
    schwarz_solve,
)
from .subdomain import Subdomain, TransmissionCondition, build_subdomains, grow_subdomain

__all__ = [
    "__version__", "BACKEND",
    "Band", "build_band", "tube_radius",
    "CPSchwarzError", "ConfigError", "Diverged", "SingularLocal", "SingularMatrix",
    "StencilIncomplete", "TubeTooWide",
    "Circle", "Sphere", "Torus", "TriMesh", "closest_point", "load_mesh", "make_surface",
    "Factorization", "SolveReport", "gmres", "lu_factor",
    "GlobalOperators", "assemble_extension", "assemble_helmholtz", "assemble_laplacian",
    "assemble_operators", "sample_rhs",
    "DisjointPartition", "build_graph", "import_partition", "partition_band",
    "BlockJacobi", "SchwarzPreconditioner", "apply_schwarz_preconditioner",
    "block_jacobi_baseline", "schwarz_solve",
    "Subdomain", "TransmissionCondition", "build_subdomains", "grow_subdomain",
]
