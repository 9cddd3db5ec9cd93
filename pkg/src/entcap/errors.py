"""Exception types raised by the toolkit."""


class EntcapError(Exception):
    """Base class for all toolkit errors."""


class NotSquare(EntcapError, ValueError):
    pass


class NotUnitary(EntcapError, ValueError):
    def __init__(self, residual, tol=None):
        self.residual = float(residual)
        self.tol = tol
        msg = f"matrix is not unitary: residual {self.residual:.3e}"
        if tol is not None:
            msg += f" exceeds tolerance {tol:.1e}"
        super().__init__(msg)


class NotNormalized(EntcapError, ValueError):
    pass


class DimensionMismatch(EntcapError, ValueError):
    pass


class OutOfRange(EntcapError, ValueError):
    pass


class EigenFailure(EntcapError, ArithmeticError):
    pass


class OptimizerFailure(EntcapError, RuntimeError):
    pass


class ObjectiveFailure(OptimizerFailure):
    pass


class InvalidFamily(EntcapError, ValueError):
    pass
