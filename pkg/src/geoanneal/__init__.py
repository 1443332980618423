"""Geometric (Aharonov-Anandan) terms in flux-qubit quantum annealing."""
from .circuits import (CircuitParams, IsingSpec, Kappa, Schedule, cjj_preset, cshunt_preset,
                       IDENTITY, SMOOTHSTEP)
from .errors import GeoAnnealError
from .pipeline import CJJPair, CShuntQubit, StaticFrames, build_static, cjj_pair_system, cshunt_system

__version__ = "0.1.0"

__all__ = [
    "CircuitParams", "IsingSpec", "Kappa", "Schedule", "cjj_preset", "cshunt_preset",
    "IDENTITY", "SMOOTHSTEP", "GeoAnnealError", "CJJPair", "CShuntQubit", "StaticFrames",
    "build_static", "cjj_pair_system", "cshunt_system",
]
