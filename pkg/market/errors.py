"""Exception hierarchy shared by every package."""
from typing import Iterable, Optional, Sequence, Tuple


class CupidError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(CupidError):
    """Input data violates a documented precondition."""


class DimensionError(ValidationError):
    """Array shapes do not agree."""

    def __init__(self, name: str, expected, got):
        self.name = name
        self.expected = expected
        self.got = got
        super().__init__(f"dimension mismatch for {name}: expected {expected}, got {got}")


class ParseError(ValidationError):
    """Malformed input file."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}, line {line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class InfeasibleProbabilitiesError(ValidationError):
    """Choice probabilities are negative or sum to more than one."""


class BoundaryError(ValidationError):
    """Quantity is undefined on the boundary of the support."""

    def __init__(self, message: str, cells: Iterable[Tuple[int, ...]] = ()):
        self.cells: Sequence[Tuple[int, ...]] = list(cells)
        if self.cells:
            shown = ", ".join(str(c) for c in self.cells[:20])
            more = "" if len(self.cells) <= 20 else f" (+{len(self.cells) - 20} more)"
            message = f"{message}: {shown}{more}"
        super().__init__(message)


class ParameterError(ValidationError):
    """Model parameter out of its admissible range."""


class UnsupportedModelError(CupidError):
    """Operation is not available for the given choice model family."""


class ConvergenceError(CupidError):
    """Iterative procedure failed to converge."""


class EstimationError(CupidError):
    """Estimation could not be carried out."""


class BackendError(CupidError):
    """Linear-programming or transport backend failed."""


class NumericalError(CupidError):
    """Evaluation produced a non-finite value."""
