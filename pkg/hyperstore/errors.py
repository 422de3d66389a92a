# errors.py - Exception hierarchy for the simulator


class SimulationError(Exception):
    """Base class for every error the simulator raises on purpose."""


class DomainError(SimulationError, ValueError):
    """An argument lies outside the domain of the operation."""


class StructureError(SimulationError):
    """Array shapes or dimensions do not match."""


class ConfigurationError(SimulationError):
    """The parameter tree is invalid or physically inconsistent."""


class FitError(SimulationError):
    """A fit did not converge. `diagnostics` holds what the fitter saw."""

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
