"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage/format problems
exit 2, resource or unsupported-oracle problems exit 3.
"""


class QlangError(Exception):
    """Base class for package errors."""


class FormatError(QlangError):
    """A file or text payload failed to parse or validate."""


class CertificateError(FormatError):
    """A prover certificate is malformed or dimensionally inconsistent."""


class StrategyError(QlangError):
    """A prover strategy was invoked on an instance it cannot serve."""


class ResourceLimitError(QlangError):
    """The requested computation exceeds the configured size limits."""


class UnsupportedOracleError(QlangError):
    """The exact oracle is not valid for the requested dimensions."""
