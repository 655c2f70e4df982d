"""Continuum ground truth for conformally flat metrics."""

from .curvature import (
    curvature_operator_3d,
    density_scalar_curvature,
    gauss_curvature_2d,
    ricci_diagonal_3d,
    scalar_curvature,
    sectional_curvature,
)
from .eikonal import (
    GridField,
    ball_volume,
    circle_perimeter_2d,
    disk_measurements,
    geodesic_distance,
    local_distance,
    small_ball_prediction,
)
from .fields import (
    DensityField,
    DomainBox,
    SmoothFunction,
    constant_field,
    field_from_config,
    gaussian_bump,
    hyperbolic_chart,
    radial_field,
    sphere_chart,
)

__all__ = [
    "DensityField", "DomainBox", "GridField", "SmoothFunction",
    "ball_volume", "circle_perimeter_2d", "constant_field", "curvature_operator_3d",
    "density_scalar_curvature", "disk_measurements", "field_from_config",
    "gauss_curvature_2d", "gaussian_bump", "geodesic_distance", "hyperbolic_chart",
    "local_distance", "radial_field", "ricci_diagonal_3d", "scalar_curvature",
    "sectional_curvature", "small_ball_prediction", "sphere_chart",
]
