"""Exception hierarchy shared by all covbasis modules."""


class CovBasisError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(CovBasisError, ValueError):
    pass


class SingularFrame(CovBasisError):
    """Basis vectors are (numerically) linearly dependent."""


class NotPositiveDefinite(CovBasisError):
    pass


class SingularOperator(CovBasisError):
    pass


class RepMismatch(CovBasisError, ValueError):
    """Operator representation tag does not match the requested formula."""


class OutOfDomain(CovBasisError, ValueError):
    pass


class InsufficientParameters(CovBasisError, ValueError):
    pass


class ScNotConverged(CovBasisError):
    """Self-consistent step did not reach tolerance.

    Attributes
    ----------
    iterations : int
    residual : float
        Max component change on the last iteration.
    """

    def __init__(self, iterations, residual):
        super().__init__(
            f"self-consistency not reached after {iterations} iterations "
            f"(last residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class DegenerateState(CovBasisError):
    pass


class AmbientUnavailable(CovBasisError):
    """The Hamiltonian model has no operator in the ambient space."""


class ConfigParseError(CovBasisError):
    """Malformed scenario configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line
