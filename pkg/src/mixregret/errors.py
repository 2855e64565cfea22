"""Exception hierarchy shared by all mixregret modules."""


class MixregretError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(MixregretError):
    """Parameter vector has the wrong shape or lies outside the domain."""


class DataError(MixregretError):
    """Observed data is malformed or contains out-of-alphabet symbols."""


class BoundaryError(MixregretError):
    """Operation requires an interior parameter but theta sits on the boundary."""


class ContextError(DataError):
    """Prediction context is too short for the family's memory order."""


class NotAvailableError(MixregretError):
    """Requested closed form or capability does not exist for this family."""


class DegenerateEvidenceError(MixregretError):
    """Every prior node assigns zero probability to the observed data."""


class SizeError(MixregretError):
    """Exact computation is infeasible at the requested problem size."""


class InstabilityError(MixregretError):
    """An iterative procedure diverged; usually means the step size is too large."""


class ConfigError(MixregretError):
    """Experiment configuration failed to parse or validate."""
