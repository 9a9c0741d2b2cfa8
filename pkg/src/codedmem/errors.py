"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry when known."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class CodecError(ValueError):
    pass


class InsufficientShares(CodecError):
    pass


class MalformedShares(CodecError):
    pass


class TraceIntegrityError(ValueError):
    """Raised when a trace lacks information an analysis needs."""
