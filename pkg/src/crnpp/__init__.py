"""Compiler, mass-action simulator and exact interpreter for CRN++ programs."""

__version__ = "0.1.0"

from crnpp.compiler import CompileConfig, CompiledProgram, compile_program  # noqa: E402
from crnpp.frontend import load, parse, validate  # noqa: E402
from crnpp.oracle import interpret  # noqa: E402
from crnpp.simulator import IdealClock, Oscillator, SolverConfig, simulate  # noqa: E402

__all__ = [
    "CompileConfig",
    "CompiledProgram",
    "IdealClock",
    "Oscillator",
    "SolverConfig",
    "compile_program",
    "interpret",
    "load",
    "parse",
    "simulate",
    "validate",
]
