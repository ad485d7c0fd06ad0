class DimensionMismatch(ValueError):
    """Variable counts or vector lengths do not agree"""

    pass


class VariableIndexOutOfRange(ValueError):
    """A variable index is not below n, or n exceeds the 64 bit monomial width"""

    pass


class InvalidParameter(ValueError):
    """A numeric parameter (p, gamma, eta, r, bins) is outside its admissible range"""

    pass


class SymbolicBudgetExceeded(Exception):
    """Symbolic expansion would exceed the configured term budget"""

    pass


class EnumerationCapExceeded(Exception):
    """Exhaustive enumeration requested above the configured variable cap"""

    pass


class UndefinedGapRatio(ArithmeticError):
    """Gap ratio is undefined (ground energy not positive or constant landscape)"""

    pass


class DegenerateDenominator(ArithmeticError):
    """The true minimum of h_max is too close to zero to form a relative difference"""

    pass


class NonFiniteValue(ArithmeticError):
    """Direct evaluation of the p-th power sum overflowed"""

    pass


class NoConstraintRecorded(Exception):
    """The multi-objective carries no inequality constraint"""

    pass


class ConfigurationError(Exception):
    """Malformed config file or flag combination"""

    pass


class InstanceError(Exception):
    """Raised when a single ensemble instance fails; carries the instance index."""

    def __init__(self, index: int, cause: BaseException) -> None:
        super().__init__("instance %d failed: %s: %s" % (index, type(cause).__name__, cause))
        self.index = index
        self.cause = cause

    def __reduce__(self):
        # crosses process-pool boundaries
        return (InstanceError, (self.index, self.cause))
