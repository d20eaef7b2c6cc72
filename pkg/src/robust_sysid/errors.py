class RankDeficientError(ValueError):
    """The stacked data matrix ``[X; U]`` does not have full row rank."""

    def __init__(self, message, sigma_min=None, sigma_max=None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max


class NotDecomposableError(ValueError):
    """A target vector lies outside the range of the given basis."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


class EnumerationCapError(ValueError):
    """Exhaustive subset enumeration would exceed the configured cap."""

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class LPError(RuntimeError):
    """The simplex method failed (iteration limit or unexpected unboundedness)."""
