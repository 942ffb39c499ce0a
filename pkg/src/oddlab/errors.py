"""Exception hierarchy.

Every error raised by the library derives from :class:`OddlabError` so the
CLI can map library failures to a single exit path.
"""


class OddlabError(Exception):
    """Base class for all library errors."""


class ConfigurationError(OddlabError, ValueError):
    """Inputs are inconsistent with the declared lattice or fiber rank."""


class ShapeError(OddlabError, ValueError):
    """Operands live on incompatible lattices."""


class StructuralError(OddlabError, ValueError):
    """A grid or sample violates a structural invariant (e.g. antipodal closure)."""


class ContractError(OddlabError, ValueError):
    """A documented precondition does not hold."""


class DegeneracyError(OddlabError, ArithmeticError):
    """A value that must be invertible is (numerically) singular."""


class CapacityError(OddlabError, ValueError):
    """A request exceeds what the truncated space can hold."""


class NotComparableError(OddlabError, ArithmeticError):
    """Two subspaces are not comparably truncated."""


class SingularOperatorError(DegeneracyError):
    """An operator expected to be invertible is singular."""

    def __init__(self, msg, smallest_singular_value):
        super().__init__(msg)
        self.smallest_singular_value = smallest_singular_value


class PathError(OddlabError, ValueError):
    """A projection path is not smooth enough to transport along."""


class IntegrationError(OddlabError, ArithmeticError):
    """Numerical integration lost conditioning."""


class ResolutionError(OddlabError, ValueError):
    """Sampling is too coarse or the sampled function nearly vanishes."""


class NoOracleError(OddlabError, ValueError):
    """No independent oracle is available for the requested term."""
