"""Exception hierarchy shared by every module in the package."""


class CxsvdError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(CxsvdError, ValueError):
    pass


class NotSquare(ShapeMismatch):
    pass


class NonFiniteInput(CxsvdError, ValueError):
    pass


class ConvergenceFailure(CxsvdError, RuntimeError):
    pass


class DegenerateSpectrum(CxsvdError, ArithmeticError):
    """Two singular values are too close for the gap matrix to be formed."""


class SingularSInverse(CxsvdError, ArithmeticError):
    """A singular value is too small to be inverted safely."""


class NonRealLoss(CxsvdError, ValueError):
    pass


class DivergenceDetected(CxsvdError, RuntimeError):
    pass


class ConfigError(CxsvdError, ValueError):
    pass
