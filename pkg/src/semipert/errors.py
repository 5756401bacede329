"""Exception hierarchy shared by all modules."""


class SemipertError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SemipertError, ValueError):
    """Vector or matrix shape does not match the space it is used with."""


class DomainError(SemipertError, ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(SemipertError, ValueError):
    """A mathematical precondition of an operation is violated."""


class SpectralProximityError(SemipertError, ValueError):
    """A resolvent was requested too close to the spectrum.

    Attributes
    ----------
    nearest : complex
        Eigenvalue closest to the requested point.
    distance : float
        Distance from the requested point to ``nearest``.
    """

    def __init__(self, message, nearest, distance):
        super().__init__(message)
        self.nearest = nearest
        self.distance = distance


class NumericError(SemipertError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Attributes
    ----------
    achieved : float or None
        Best tolerance reached before giving up.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SurjectivityError(SemipertError, ValueError):
    """The boundary operator is not onto on the kernel of the maximal operator."""


class AssemblyError(SemipertError, ValueError):
    """Constraint rows of a boundary-perturbed generator are rank deficient."""


class ConfigError(SemipertError, ValueError):
    """An experiment or problem configuration is invalid.

    Attributes
    ----------
    field : str or None
        Dotted name of the offending configuration field.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
