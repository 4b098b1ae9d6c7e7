"""Simulation and verification of up-down ordered Chinese restaurant processes."""
from .core import (
    Composition,
    Jump,
    MarkedPath,
    NonAbsorptionError,
    OracleUnreliableError,
    OutOfDomainError,
    RandomSource,
    StepFunction,
    total_mass,
)

__version__ = "0.1.0"

__all__ = [
    "Composition",
    "Jump",
    "MarkedPath",
    "NonAbsorptionError",
    "OracleUnreliableError",
    "OutOfDomainError",
    "RandomSource",
    "StepFunction",
    "total_mass",
]
