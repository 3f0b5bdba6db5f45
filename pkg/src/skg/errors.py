"""Exception hierarchy shared by all pipeline stages."""


class SKGError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SKGError, ValueError):
    """A configuration object violates one of its invariants."""


class InputError(SKGError, ValueError):
    """Operation inputs are inconsistent (lengths, shapes, non-finite values)."""


class FormatError(SKGError):
    """A file does not follow the expected binary layout."""


class CorruptHeaderError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class ConvergenceError(SKGError):
    """Too few samples to run a leakage estimator."""


class UnusableEntropyError(SKGError, ValueError):
    """Conditional min-entropy is zero or negative; no key can be distilled."""


class ExhaustionError(SKGError):
    """Not enough reconciled material to reach the required input length."""

    def __init__(self, message, shortfall_bits):
        super().__init__(message)
        self.shortfall_bits = shortfall_bits


class ParseError(SKGError, ValueError):
    """A user-supplied document (submission, manifest) cannot be parsed."""
