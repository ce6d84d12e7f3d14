"""Desk-scale lab for blockage-resilient near-field THz beam training."""

from .codebooks import (BeamParams, Codebook, CodebookSpec, airy_phase, build_codebook,
                        build_dft_codebook, make_codeword)
from .field import beam_gain, direct_field, fresnel_field, propagate, transfer_function
from .scenario import (GridSpec, Obstacle, Region, ScenarioConfig, blockage_mask_row,
                       blockage_ratio, build_grid, load_scenario, save_scenario)
from .trajectory import CausticPoint, caustic_curve, max_range, paraxial_trajectory

__version__ = "0.1.0"

__all__ = [
    "BeamParams", "Codebook", "CodebookSpec", "CausticPoint", "GridSpec", "Obstacle",
    "Region", "ScenarioConfig", "airy_phase", "beam_gain", "blockage_mask_row",
    "blockage_ratio", "build_codebook", "build_dft_codebook", "build_grid",
    "caustic_curve", "direct_field", "fresnel_field", "load_scenario", "make_codeword",
    "max_range", "paraxial_trajectory", "propagate", "save_scenario", "transfer_function",
    "__version__",
]
