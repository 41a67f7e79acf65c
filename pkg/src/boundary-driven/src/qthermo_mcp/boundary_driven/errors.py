"""Exceptions raised by the boundary-driven simulation package."""


class SimulationError(Exception):
    """Base class for simulation failures."""


class StructuralError(SimulationError, ValueError):
    """Shapes, labels or grids do not fit together."""


class ContractError(SimulationError):
    """A numerical contract (Hermiticity, positivity, trace condition) was violated."""
