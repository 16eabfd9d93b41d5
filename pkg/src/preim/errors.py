"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A linear solve or factorization failed to reach its tolerance."""


class NonTerminationError(NumericalError):
    """An offline greedy loop exceeded its iteration budget."""


class DegenerateResidualError(ValueError):
    """A residual field too small to normalize was passed to the EIM."""
