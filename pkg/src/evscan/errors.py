"""Exception types shared across the pipeline."""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of an operation."""


class BehindCameraError(DomainError):
    """A world point has non-positive camera-space depth."""


class InputError(ValueError):
    """Structurally invalid input (mismatched lengths, bad ranges, ...)."""


class LoadError(ValueError):
    """A file failed schema or invariant validation on load."""


class EvscanUsageError(ValueError):
    """Bad command-line usage or configuration (CLI exit code 2)."""


class FitDivergenceError(RuntimeError):
    """The optimizer produced a non-finite loss."""

    def __init__(self, iteration: int, message: str = ""):
        self.iteration = iteration
        super().__init__(message or f"non-finite loss at iteration {iteration}")
