"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericError`` -> 3.
"""


class WsadError(Exception):
    """Base class for all package errors."""


class DataError(WsadError, ValueError):
    """Invalid input data, file contents, or configuration."""


class FormatError(DataError):
    """A binary file does not match its declared layout."""


class BadMagicError(FormatError):
    pass


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class EmptyBagError(FormatError):
    pass


class NumericError(WsadError, ArithmeticError):
    """A non-finite value appeared where training math requires finite ones."""
