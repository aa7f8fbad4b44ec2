"""
Configuration settings for the finsler-lab application.
"""

import os
from typing import Dict, Any

# Finite differences, Newton solves and conditioning
NUMERICS_CONFIG = {
    "fd_step_x": 1e-5,            # scaled by (1 + |x|) for x-derivatives of F
    "fd_step_theta": 1e-5,        # derivative of the Legendre image along a fiber
    "fd_step_density": 1e-4,      # derivatives of densities on the Grassmann cone
    "fd_step_bundle": 1e-5,       # exterior derivative of the Hilbert 1-form
    "newton_max_iter": 60,
    "newton_tolerance": 1e-13,
    "dual_norm_starts": 6,
    "max_condition_number": 1e10,
    "zero_tolerance": 1e-12,
    "renormalize_tolerance": 1e-10,
}

# Quadrature on spheres, disks and boxes
CUBATURE_CONFIG = {
    "circle_nodes": 128,          # trapezoid rule, k = 2
    "sphere_nodes": (24, 48),     # Gauss-Legendre x trapezoid, k = 3
    "relative_tolerance": 1e-8,   # Richardson (half-grid) acceptance
    "check_convergence": True,
}

# Busemann projective metrics
CROFTON_CONFIG = {
    "polar_nodes": 16,            # Gauss-Legendre nodes per hemisphere
    "azimuth_nodes": 48,          # trapezoid nodes around the pole
    "equator_nodes": 64,
    "window_margin": 2.0,
    "mc_batch_size": 20000,
    "tangency_threshold": 1e-9,
    "workers": int(os.environ.get("FINSLER_WORKERS", 1)),
}

# First variation and mean curvature
VARIATION_CONFIG = {
    "grid": 64,                   # Gauss-Legendre nodes per parameter direction
    "coarse_grid": 32,            # grid used for the refinement error estimate
    "bump_profile": "polynomial", # (1 - r^2)^4; "cosine" is cos(pi r / 2)^4
    "bump_radius": 0.25,
    "radial_nodes": 24,
    "angular_nodes": 48,
    "s_step": 1e-3,
    "richardson_tolerance": 1e-6,
    "jacobian_step": 1e-6,
}

# Finsler surfaces
CARTAN_CONFIG = {
    "bundle_step": 1e-4,
    "residual_tolerance": 1e-4,
    "nonzero_threshold": 1e-4,
}

# Experiment runner
EXPERIMENT_CONFIG = {
    "default_seed": int(os.environ.get("FINSLER_SEED", 20240601)),
    "float_digits": 12,
    "write_csv": True,
}

# Path settings
_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
PATHS = {
    "data_dir": os.environ.get("FINSLER_DATA_DIR", os.path.join(_ROOT, "data")),
    "results_dir": os.environ.get("FINSLER_RESULTS_DIR", os.path.join(_ROOT, "data", "results")),
    "schemas_dir": os.path.join(_ROOT, "schemas"),
    "experiments_dir": os.path.join(_ROOT, "config", "experiments"),
}

# Logging settings
LOGGING_CONFIG = {
    "level": os.environ.get("FINSLER_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "file": os.path.join(PATHS["data_dir"], "finsler_lab.log"),
}


def ensure_directories() -> None:
    """Create the data and results directories if they do not exist."""
    for key in ("data_dir", "results_dir"):
        os.makedirs(PATHS[key], exist_ok=True)


def get_settings() -> Dict[str, Any]:
    """
    Get all application settings.

    Returns:
        Dictionary with all configuration settings
    """
    return {
        "numerics": NUMERICS_CONFIG,
        "cubature": CUBATURE_CONFIG,
        "crofton": CROFTON_CONFIG,
        "variation": VARIATION_CONFIG,
        "cartan": CARTAN_CONFIG,
        "experiment": EXPERIMENT_CONFIG,
        "paths": PATHS,
        "logging": LOGGING_CONFIG,
    }
