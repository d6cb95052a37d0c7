"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: input problems exit 2, numerical
failures exit 3.
"""


class SurrkitError(Exception):
    """Base class for all toolkit errors."""


class InputError(SurrkitError):
    """Malformed file, inconsistent shapes, or invalid configuration."""


class NumericError(SurrkitError):
    """Numerical failure: factorization breakdown, divergence, non-finite loss."""


class UnsupportedModelError(SurrkitError):
    """Operation applied to a model type that cannot support it."""


class StoreError(SurrkitError):
    """Model bundle missing, corrupted, or from an unsupported format version."""
