"""
msjstab.errors

Exception types raised by the analysis, simulation and CLI layers.
"""


class ParameterError(ValueError):
    """A parameter set, grid or index violates its invariants."""


class EnumerationTooLarge(ValueError):
    """Exhaustive phase-vector enumeration would exceed the size guard."""


class ReducibleChainError(RuntimeError):
    """A Markov chain has more than one closed class, so no unique steady state."""


class ConsistencyError(RuntimeError):
    """An identity that must hold by construction failed (implementation bug)."""
