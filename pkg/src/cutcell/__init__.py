"""Cut-cell incompressible Navier-Stokes solver on a staggered grid.

Flow past fixed and moving rigid circles: Shortley-Weller cut-cell operators,
a BDF2 semi-implicit projection stepper, and a capacitance-matrix fast direct
solver (or preconditioned BiCGSTAB) for the implicit systems.
"""

from .app import (
    DragSeries,
    SimConfig,
    convergence_study,
    load_config,
    parse_config,
    read_drag_csv,
    run_case,
    serialize_config,
    validate_drag,
    write_drag_csv,
)
from .discretization import (
    assemble_helmholtz,
    assemble_pressure_poisson,
    convection,
    divergence,
    gradient,
    vorticity,
)
from .errors import (
    ConfigError,
    NonConvergenceError,
    SingularSystemError,
    UnderResolvedGeometryError,
)
from .forces import (
    BodyForce,
    ForceCoefficients,
    body_force,
    coefficients,
    predicted_drag,
)
from .geometry import (
    CUT,
    FLUID,
    RELOCATED,
    SOLID,
    CellMask,
    CutCellGeometry,
    LevelSetBody,
    body_velocity,
    classify,
    cut_geometry,
    levelset_eval,
)
from .grid import StaggeredGrid, build_grid, field_positions
from .linsolve import (
    CapacitanceSolver,
    FastPlan,
    KrylovSettings,
    TridiagonalSystem,
    build_fast_plan,
    capacitance_build,
    capacitance_solve,
    dac_solve,
    fast_solve,
    krylov_solve,
    thomas_solve,
)
from .timestepper import FlowState, Stepper

__version__ = "0.1.0"

__all__ = [
    "BodyForce",
    "CUT",
    "CapacitanceSolver",
    "CellMask",
    "ConfigError",
    "CutCellGeometry",
    "DragSeries",
    "FLUID",
    "FastPlan",
    "FlowState",
    "ForceCoefficients",
    "KrylovSettings",
    "LevelSetBody",
    "NonConvergenceError",
    "RELOCATED",
    "SOLID",
    "SimConfig",
    "SingularSystemError",
    "StaggeredGrid",
    "Stepper",
    "TridiagonalSystem",
    "UnderResolvedGeometryError",
    "assemble_helmholtz",
    "assemble_pressure_poisson",
    "body_force",
    "body_velocity",
    "build_fast_plan",
    "build_grid",
    "capacitance_build",
    "capacitance_solve",
    "classify",
    "coefficients",
    "convection",
    "convergence_study",
    "cut_geometry",
    "dac_solve",
    "divergence",
    "fast_solve",
    "field_positions",
    "gradient",
    "krylov_solve",
    "levelset_eval",
    "load_config",
    "parse_config",
    "predicted_drag",
    "read_drag_csv",
    "run_case",
    "serialize_config",
    "thomas_solve",
    "validate_drag",
    "vorticity",
    "write_drag_csv",
]
