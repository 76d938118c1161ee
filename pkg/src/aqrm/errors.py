"""Exception types raised by the library."""


class AQRMError(Exception):
    """Base class for all library errors."""


class DimensionError(AQRMError, ValueError):
    """Operator shapes are incompatible with the composite space."""


class EigensolverError(AQRMError, RuntimeError):
    """Dense Hermitian eigensolve failed or produced an inaccurate result."""


class SteadyStateError(AQRMError, RuntimeError):
    """Null-space extraction failed (degenerate or non-convergent)."""


class IntegrationError(AQRMError, RuntimeError):
    """Time integration rejected a step (trace drift or solver failure)."""


class UndefinedQuantityError(AQRMError, ValueError):
    """A ratio quantifier has a vanishing denominator."""


class GridCoverageError(AQRMError, ValueError):
    """A phase-space grid does not cover the support of the state."""
