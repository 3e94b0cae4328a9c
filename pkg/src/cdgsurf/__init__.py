"""Continuous/discontinuous Galerkin solver for the biharmonic equation on closed surfaces."""

from .assembly import Discretization, SparseSystem, assemble, load_vector, solve
from .exceptions import (
    AxisPoint,
    CDGError,
    DegenerateFace,
    DegenerateTriangle,
    NonManifoldEdge,
    NonPositive,
    NonPositiveMeasure,
    OutsideNeighborhood,
    SolverBreakdown,
)
from .geometry import (
    Sphere,
    SurfaceJet,
    Torus,
    closest_point,
    extended_curvatures,
    measure_ratio,
    surface_jet,
)
from .mesh import (
    EdgeAdjacency,
    MeshStats,
    TriangleMesh,
    build_adjacency,
    generate_mesh,
    mesh_size,
    perturb_vertices,
    write_off,
)
from .problems import ModelProblem, get_problem, sphere_problem, torus_problem
from .solver import RunConfig, SurfaceBiharmonicSolver, convergence_study, run_level
from .verify import (
    ConvergenceReport,
    energy_error,
    eoc,
    geometry_rates,
    l2_quotient_error,
    lifting_diagnostic,
    lift,
    lifted_energy_error,
)

__version__ = "0.1.0"
