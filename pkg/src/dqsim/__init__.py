"""Distributed quantum computing simulator."""

from .circuit import Circuit, CircuitError, Instruction
from .noise import NoiseParams
from .sim import Histogram, run, statevector, total_variation

__all__ = [
    "Circuit",
    "CircuitError",
    "Instruction",
    "NoiseParams",
    "Histogram",
    "run",
    "statevector",
    "total_variation",
]

__version__ = "0.1.0"
