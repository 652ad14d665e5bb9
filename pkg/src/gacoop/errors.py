"""Exception hierarchy. Every error the library raises derives from GacoopError."""


class GacoopError(Exception):
    """Base class for all library errors."""


class ContractViolation(GacoopError):
    """An operation was called with inputs that violate its stated preconditions."""


class DegenerateVectorError(GacoopError):
    """A vector with near-zero norm where a direction is required."""


class DimensionMismatchError(GacoopError):
    """Operands whose shapes do not agree."""


class FormatError(GacoopError):
    """Base class for file-format problems."""


class BadMagicError(FormatError):
    """File does not start with the FBNK magic bytes."""


class VersionError(FormatError):
    """Unsupported container version."""


class TruncatedFileError(FormatError):
    """File ended before the declared payload was complete."""


class InvariantError(FormatError):
    """Payload parsed but violates a stored-data invariant."""


class ConfigError(GacoopError):
    """Invalid or unknown configuration key/value."""


class NumericAbortError(GacoopError):
    """Training produced a non-finite quantity; aborted without clipping."""
