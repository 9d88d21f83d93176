"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid caller-supplied data (out-of-range ids, non-finite values, shape mismatch)."""


class ParseError(InputError):
    """Malformed text input. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(InputError):
    """Binary file does not match the expected layout (bad magic, truncated payload)."""


class ConfigError(ValueError):
    """Inconsistent run configuration (bad ratios, missing files, impossible sampling)."""
