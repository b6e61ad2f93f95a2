"""Exception types raised across the package."""


class PConvexError(Exception):
    """Base class for errors raised by pconvex."""


class ConvergenceError(PConvexError, ArithmeticError):
    """An iterative routine hit its iteration cap."""


class DomainError(PConvexError, ValueError):
    """A point (or a finite-difference stencil) lies outside a domain."""


class DegenerateGradientError(PConvexError, ValueError):
    """The gradient of a defining function is too small to define a normal."""


class FocalPointError(PConvexError, ValueError):
    """A parallel displacement reached or crossed a focal point."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CertificationError(PConvexError, ValueError):
    """A dictionary entry failed its plurisubharmonicity certification."""

    def __init__(self, message, entry=None):
        super().__init__(message)
        self.entry = entry
