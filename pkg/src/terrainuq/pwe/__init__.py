"""Two-way split-step parabolic-equation propagation over staircase terrain."""
from .config import C0, AntennaConfig, GroundKind, GroundModel, PweConfig
from .solver import (
    ComplexField,
    PathLossTrace,
    absorber_taper,
    aperture_width,
    apply_ground_boundary,
    free_space_axis_amplitude,
    free_space_path_loss_db,
    gaussian_source,
    ground_index,
    ground_step,
    march_field,
    run_two_way,
    spectral_multiplier,
    step_backward,
    step_forward,
)
from .terrain import GENERATORS, TerrainProfile, double_hill, flat, random_smooth, thin_screen, wedge

__all__ = [
    "C0", "AntennaConfig", "GroundKind", "GroundModel", "PweConfig",
    "ComplexField", "PathLossTrace", "absorber_taper", "aperture_width", "apply_ground_boundary",
    "free_space_axis_amplitude", "free_space_path_loss_db", "gaussian_source", "ground_index",
    "ground_step", "march_field", "run_two_way", "spectral_multiplier", "step_backward", "step_forward",
    "GENERATORS", "TerrainProfile", "double_hill", "flat", "random_smooth", "thin_screen", "wedge",
]
