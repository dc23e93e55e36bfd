"""Mobility-weighted multiphase Allen-Cahn simulations on periodic grids.

The public pieces are re-exported here; see the submodules for details:
``grid`` (Fourier operators), ``phases`` (wells, tensions, mobilities),
``solver`` (time stepping and projections), ``nanowire`` (sharp-interface
wire shapes), ``scenarios`` (initial data, protocols, measurements),
``config``/``output``/``cli`` (files and command line).
"""

__version__ = "0.1.0"

from .grid import Grid, forward_transform, inverse_transform, laplacian_symbol, solve_semi_implicit
from .phases import (
    MobilitySet,
    TensionSet,
    herring_angles,
    optimal_profile,
    profile_constant,
    young_angle,
)
from .solver import (
    Diagnostics,
    PhaseState,
    SolverParams,
    VolumeSchedule,
    advance_targets,
    energy,
    project_partition,
    project_partition_volume,
    run,
    step_diffusion,
)
from .scenarios import (
    Circle,
    Rest,
    contact_angle,
    extract_contour,
    init_from_shapes,
    locate_junction,
    measure_angles,
    vls_protocol,
    wetting_scenario,
)
from .nanowire import WireParams, droplet_radius, integrate_profile, invert_radius

__all__ = [
    "Grid", "forward_transform", "inverse_transform", "laplacian_symbol", "solve_semi_implicit",
    "MobilitySet", "TensionSet", "herring_angles", "optimal_profile", "profile_constant",
    "young_angle", "Diagnostics", "PhaseState", "SolverParams", "VolumeSchedule",
    "advance_targets", "energy", "project_partition", "project_partition_volume", "run",
    "step_diffusion", "Circle", "Rest", "contact_angle", "extract_contour", "init_from_shapes",
    "locate_junction", "measure_angles", "vls_protocol", "wetting_scenario", "WireParams",
    "droplet_radius", "integrate_profile", "invert_radius",
]
