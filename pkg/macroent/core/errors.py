"""Exception hierarchy shared by the library and the CLI."""
from __future__ import annotations


class MacroentError(ValueError):
    """Base class for every domain error raised by macroent."""


class DimensionError(MacroentError):
    """Operands have incompatible shapes or subsystem dimensions."""


class InvariantError(MacroentError):
    """A value violates the invariants of its type."""


class NoiseError(MacroentError):
    """Unsupported noise kind or a noise level outside its domain."""


class BracketError(MacroentError):
    """Bisection bracket without a sign change or with a non-finite value."""


class SamplingError(MacroentError):
    """A Monte Carlo configuration that cannot be sampled or batched."""


__all__ = [
    "MacroentError",
    "DimensionError",
    "InvariantError",
    "NoiseError",
    "BracketError",
    "SamplingError",
]
