"""Exception hierarchy shared by every module of the package."""


class RelIndexError(Exception):
    """Base class for all errors raised by relindex."""


class EigenError(RelIndexError):
    """Eigensolver failed to reach the residual contract."""

    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class PreconditionError(RelIndexError, ValueError):
    """An operation was called outside its documented domain."""


class InadmissibleError(PreconditionError):
    """Perturbation does not satisfy lambda_a*I < B < lambda_b*I."""


class ShiftError(RelIndexError):
    """Shift k makes A - kI or B - kI numerically singular."""


class ResolutionError(RelIndexError):
    """Adaptive spectral-flow tracking could not resolve an interval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class ModelError(RelIndexError, ValueError):
    """Invalid model data (asymmetric blocks, bad grid, bad ordering)."""


class ShiftSearchError(RelIndexError):
    """No epsilon on the search grid satisfies the dual-shift conditions."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class ConvexityError(RelIndexError):
    """Pointwise Legendre solve stagnated; R_eps is not strictly convex there."""

    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class ConfigError(RelIndexError, ValueError):
    """Malformed experiment configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
