"""Exception types raised by the solver toolkit."""


class OBCDError(ValueError):
    """Base class for all errors raised by :mod:`obcd`."""


class RankDeficient(OBCDError):
    pass


class NotOrthogonal(OBCDError):
    pass


class DegeneratePolynomial(OBCDError):
    pass


class InfeasibleSubproblem(OBCDError):
    """No planar orthogonal matrix keeps the block nonnegative."""


class EmptyModel(OBCDError):
    pass


class NotTrigPolynomial(OBCDError):
    """Sampled function is not a trigonometric polynomial of the declared degree."""


class TooFewRows(OBCDError):
    pass


class NotSymmetric(OBCDError):
    pass


class NotPSD(OBCDError):
    pass


class GradientCheckFailed(OBCDError):
    pass


class MalformedCsv(OBCDError):
    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class InfeasibleStart(OBCDError):
    pass
