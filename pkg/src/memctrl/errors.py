"""Exception hierarchy shared across the package."""


class MemctrlError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(MemctrlError):
    """Two objects that must share a time grid do not."""


class ProblemFormatError(MemctrlError):
    """A problem file failed to parse or validate."""


class BlowUpError(MemctrlError):
    """A state or costate left the admissible range during a solve."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class FixedPointError(MemctrlError):
    """A contraction iteration exceeded its iteration budget."""

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class RankReductionError(MemctrlError):
    """Null-vector elimination failed to find a usable null direction."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row
