"""Multilinear kernel means and maximal operators on quasi-metric measure spaces."""

from __future__ import annotations

__version__ = "0.1.0"

from .rng import RandomStream
from .space import (
    AhlforsBounds,
    Cantor,
    Circle,
    FiniteCloud,
    PowerCircle,
    QuasimetricReport,
    Space,
    Torus,
    estimate_doubling_constant,
    exact_cloud_doubling_constant,
    space_from_config,
    validate_quasimetric,
)

__all__ = [
    "__version__",
    "RandomStream",
    "AhlforsBounds",
    "Space",
    "Circle",
    "PowerCircle",
    "Torus",
    "Cantor",
    "FiniteCloud",
    "QuasimetricReport",
    "space_from_config",
    "validate_quasimetric",
    "estimate_doubling_constant",
    "exact_cloud_doubling_constant",
]
