"""
Exceptions raised by the overlay toolkit. Everything derives from OverlayError so
the CLI can map a whole family to one exit code.
"""
from typing import Optional


class OverlayError(Exception):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(OverlayError):
    pass


class InvalidParameterError(OverlayError, ValueError):
    pass


class DomainError(OverlayError, ValueError):
    """A metric formula was evaluated outside the range where it is defined."""


class GraphParseError(OverlayError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"{message} at line {line_number}"
        super().__init__(message)


class InvalidCutError(OverlayError):
    pass


class SizeCapError(OverlayError):
    def __init__(self, vertex_count: int, cap: int, hint: str = "use the mixing-rate cover test instead"):
        self.vertex_count = vertex_count
        self.cap = cap
        super().__init__(
            f"graph has {vertex_count} vertices, above the exhaustive-enumeration cap of {cap}; {hint}"
        )


class DegenerateGraphError(OverlayError):
    pass


class DisconnectedGraphError(OverlayError):
    def __init__(self, message: str = "graph not connected"):
        super().__init__(message)


class NumericalFailureError(OverlayError):
    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class WalkLimitError(OverlayError):
    def __init__(self, steps: int, visited: int, vertex_count: int):
        self.steps = steps
        self.visited = visited
        self.vertex_count = vertex_count
        super().__init__(
            f"random walk stopped after {steps} steps having visited {visited} of {vertex_count} vertices"
        )


class InvalidKernelError(OverlayError):
    pass


class RouteError(OverlayError):
    pass
