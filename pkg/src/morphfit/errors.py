"""Exception types shared across the package."""


class MorphfitError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MorphfitError, ValueError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class InfeasibleInputError(MorphfitError, ValueError):
    """The input is structurally valid but the problem cannot be solved
    (e.g. fewer than the minimum number of visible landmarks)."""


class ParseError(MorphfitError, ValueError):
    """A file could not be parsed; the message names the offending line or field."""


class ValidationError(MorphfitError, ValueError):
    """A parsed file is syntactically fine but internally inconsistent."""
