"""Exception types raised across the package."""


class InputError(ValueError):
    """Invalid argument shape, value or combination."""


class ParseError(InputError):
    """Malformed dataset file."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericalError(FloatingPointError):
    """Non-finite values encountered while running the particle dynamics."""
