"""Numerical laboratory for the viscous shallow-water vacuum free-boundary
problem on the periodic slab, in Lagrangian variables.

The package builds a degenerate-weighted spectral basis, runs a linearized
Galerkin solver inside a Picard iteration for the nonlinear problem, and
verifies the kinematic, spectral, and energy structure of the scheme.
"""
from .config import ConfigError, SolverConfig, load_config
from .eigenbasis import (
    OperatorPair,
    SpectralBasis,
    assemble_operator,
    basis_regularity,
    solve_eigenbasis,
    verify_basis,
)
from .eulerian import eulerian_fields, eulerian_mass, export_run, invert_flow_map
from .grid import (
    Grid,
    GridError,
    WeightError,
    WeightField,
    build_grid,
    build_weight,
    validate_physical_vacuum,
    wall_distance,
)
from .kinematics import (
    FlowMapState,
    KinematicTensors,
    advance_flow_map,
    check_bounds,
    deformation,
    identity_state,
    metric_min_eigenvalue,
    piola_residual,
    tensors_from_grad,
)
from .linearized import (
    GalerkinAssembler,
    freeze_coefficients,
    project_initial_velocity,
    run_linearized,
    step_linearized,
    weak_residual,
)
from .nonlinear import (
    PicardSettings,
    PicardTrace,
    Solution,
    energy_functional,
    picard_solve,
    reconstruct_velocity,
)
from .weighted import (
    check_hardy_embedding,
    check_interpolation,
    diff_op,
    integrate,
    weighted_inner,
    weighted_norm,
)

__version__ = "0.1.0"
