"""Dense optical flow via local quadratic expansion, aggregated and pyramided."""

from .core import (
    build_system,
    estimate_flow,
    gaussian_pyramid,
    poly_expand,
    residual,
    solve_field,
    solve_point,
)
from .imops import gaussian_kernel, resize_bilinear, to_unit_gray
from .types import FlowField, FlowParams, NormalSystem, PolyField

__all__ = [
    "FlowField",
    "FlowParams",
    "NormalSystem",
    "PolyField",
    "build_system",
    "estimate_flow",
    "gaussian_kernel",
    "gaussian_pyramid",
    "poly_expand",
    "resize_bilinear",
    "residual",
    "solve_field",
    "solve_point",
    "to_unit_gray",
]
