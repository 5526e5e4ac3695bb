"""Collective emission of dipole-coupled emitter oligomers."""

from .emcore import DomainError, coupling_rate
from .geometry import build_double_ring, build_points, build_ring, build_ring_plus_center

__all__ = [
    "DomainError",
    "coupling_rate",
    "build_ring",
    "build_ring_plus_center",
    "build_double_ring",
    "build_points",
]
