"""Exception types raised across the package."""


class ShapeError(ValueError):
    """Array or block dimensions are inconsistent with a flag shape."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class FCIDumpError(ValueError):
    """Malformed FCIDUMP input.

    The offending line number (1-based) is kept in ``lineno`` when known.
    """

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class NotDescentDirectionError(ValueError):
    """A line search was asked to move along a non-descent direction."""


class LineSearchError(RuntimeError):
    """The line search exhausted its evaluation budget without a Wolfe step."""
