"""Exception types. Each carries a short ``code`` used in CLI diagnostics."""


class EnergyError(ValueError):
    code = "error"


class InvalidShapeError(EnergyError):
    """Degenerate curve or mesh, or one that violates its structural invariants."""

    code = "invalid-shape"


class ParameterError(EnergyError):
    code = "parameter"


class PreconditionError(EnergyError):
    code = "precondition"


class ConformalityError(PreconditionError):
    code = "conformality"


class PointAtInfinityError(EnergyError):
    code = "infinity"


class SamplingError(EnergyError):
    code = "sampling"


class TopologyError(EnergyError):
    code = "topology"


class UndefinedResultError(EnergyError):
    code = "undefined"


class FormatError(EnergyError):
    """Unreadable or malformed input file."""

    code = "io"


class SingularityWarning(UserWarning):
    """An energy hit a near-coincident pair and returned +inf."""


class GeometryWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass
