"""k-free points of lattices: patch statistics, entropy, Euler products and diffraction."""

__version__ = "0.1.0"

from .diffraction import (
    autocorr_weight_closed,
    autocorr_weight_empirical,
    difference_set_check,
    diffraction_intensity,
    dual_basis,
    peak_list,
)
from .kfree_sets import KFreeConfig, admissible, density_empirical, find_hole, is_k_free, k_content
from .lattice import Lattice, Radius, ResourceCapError, enumerate_ball, preset
from .numtheory import DomainError, pi_r, xi, zeta
from .patches import (
    n_rho_exact,
    patch_census,
    patch_frequency_closed,
    entropy_measure_estimate,
    entropy_patch_counting_estimate,
)

__all__ = [
    "DomainError",
    "KFreeConfig",
    "Lattice",
    "Radius",
    "ResourceCapError",
    "admissible",
    "autocorr_weight_closed",
    "autocorr_weight_empirical",
    "density_empirical",
    "difference_set_check",
    "diffraction_intensity",
    "dual_basis",
    "entropy_measure_estimate",
    "entropy_patch_counting_estimate",
    "enumerate_ball",
    "find_hole",
    "is_k_free",
    "k_content",
    "n_rho_exact",
    "patch_census",
    "patch_frequency_closed",
    "peak_list",
    "pi_r",
    "preset",
    "xi",
    "zeta",
]
