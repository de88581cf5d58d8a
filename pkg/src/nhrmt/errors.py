"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """Invalid input parameters (dimensions, widths, grids, configs)."""


class ComputationError(RuntimeError):
    """A numerical routine failed to produce a result."""

    def __init__(self, message, realization_index=None):
        if realization_index is not None:
            message = f"{message} (realization {realization_index})"
        super().__init__(message)
        self.realization_index = realization_index


class DegeneracyError(ComputationError):
    """Kramers pairing of a self-dual spectrum failed its residual guard."""
