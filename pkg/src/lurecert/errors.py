"""Error taxonomy shared across the package.

Input problems (bad shapes, malformed documents) are ValueErrors so they
surface as client errors at the service boundary; runtime failures of the
numerical machinery are RuntimeErrors.
"""


class DimensionError(ValueError):
    """Operands have incompatible or non-conforming shapes."""


class SystemFormatError(ValueError):
    """A system document failed parsing or violated a model invariant."""


class NumericalError(RuntimeError):
    """An iterative numerical routine failed to converge or blew up."""


class NoSolutionError(RuntimeError):
    """A linear problem has no (unique) solution."""


class CertificationFailure(RuntimeError):
    """No certificate exists for the requested property.

    Carries an optional ``diagnostics`` dict describing which condition
    failed and where, so callers can report the failure instead of just
    propagating a bare exception.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
