"""Exception types raised across the package."""


class HsigeoError(Exception):
    """Base class for all errors raised by hsigeo."""


class FormatError(HsigeoError, ValueError):
    pass


class UnsupportedDtypeError(FormatError):
    pass


class TruncationError(FormatError):
    pass


class ShapeError(HsigeoError, ValueError):
    pass


class EmptyInputError(HsigeoError, ValueError):
    pass


class DegenerateInputError(HsigeoError, ValueError):
    pass


class DegenerateAngleError(DegenerateInputError):
    """A centered class mean sits on the center of means, so its angle is undefined."""

    def __init__(self, class_id, norm):
        self.class_id = class_id
        self.norm = norm
        super().__init__(
            f"class {class_id}: centered mean has norm {norm:.3e}, angle undefined"
        )


class ConfigError(HsigeoError, ValueError):
    pass


class ComparisonError(HsigeoError, ValueError):
    pass


class DomainError(HsigeoError, ValueError):
    pass


class ConvergenceError(HsigeoError, RuntimeError):
    """Iteration budget ran out; ``lower``/``upper`` bracket the optimal hull distance."""

    def __init__(self, message, lower=None, upper=None, iterations=None):
        self.lower = lower
        self.upper = upper
        self.iterations = iterations
        super().__init__(message)


class DimensionError(HsigeoError, ValueError):
    pass
