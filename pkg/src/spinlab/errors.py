class SpinlabError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(SpinlabError, ValueError):
    pass


class DegenerateFormError(SpinlabError, ValueError):
    """A bilinear form has an eigenvalue below the degeneracy floor."""


class NotJoinableError(SpinlabError, ValueError):
    """Two forms are not joinable along the affine path between them."""


class NotPseudoOrthogonalError(SpinlabError, ValueError):
    pass


class LogarithmError(SpinlabError, ValueError):
    """No real logarithm in the pseudo-orthogonal Lie algebra was found."""


class TwistMismatchError(SpinlabError, ValueError):
    pass


class SymbolFitError(SpinlabError, RuntimeError):
    """The two-scale principal symbol fit did not converge."""


class CFLViolationError(SpinlabError, RuntimeError):
    """The evolved charge blew up, which signals an unstable time step."""
