"""Exception types raised across the package."""


class BvgmError(Exception):
    """Base class for package errors."""


class ValidationError(BvgmError, ValueError):
    pass


class ConstantColumn(ValidationError):
    def __init__(self, j: int):
        super().__init__(f"column {j} has zero variance")
        self.j = j


class NonFinite(ValidationError):
    pass


class DomainError(BvgmError, ValueError):
    """A distribution parameter is outside its support."""


class NotSPD(BvgmError, ArithmeticError):
    pass


class DegenerateResidual(BvgmError, ArithmeticError):
    pass


class MethodUnavailable(BvgmError, ValueError):
    pass


class TooLarge(BvgmError, ValueError):
    def __init__(self, p: int, cap: int):
        super().__init__(f"p={p} exceeds the enumeration cap of {cap}")
        self.p = p
        self.cap = cap


class ZeroVariance(BvgmError, ArithmeticError):
    pass


class DegenerateKnots(BvgmError, ValueError):
    pass
