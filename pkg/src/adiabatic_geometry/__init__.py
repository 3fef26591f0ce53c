"""Berry connection, curvature, metric and induced inertia for fast quantum systems
driven by slow coordinates, with driven and classical dynamics built on them."""

from .errors import (
    DegeneracyError,
    DomainError,
    GaugeError,
    InertiaError,
    PathTooCoarseError,
    ValidationError,
)
from .geometry import (
    EffectiveField,
    GeometricTensors,
    berry_connection,
    effective_field,
    geometric_tensors,
    geometry_grid,
    induced_inertia,
    quantum_geometric_tensor,
    scalar_potential,
    total_inertia,
)
from .spectral import SpectralData, derivative_couplings, eigensystem, parallel_transport_gauge

__version__ = "0.1.0"

__all__ = [
    "DegeneracyError",
    "DomainError",
    "EffectiveField",
    "GaugeError",
    "GeometricTensors",
    "InertiaError",
    "PathTooCoarseError",
    "SpectralData",
    "ValidationError",
    "berry_connection",
    "derivative_couplings",
    "effective_field",
    "eigensystem",
    "geometric_tensors",
    "geometry_grid",
    "induced_inertia",
    "parallel_transport_gauge",
    "quantum_geometric_tensor",
    "scalar_potential",
    "total_inertia",
]
