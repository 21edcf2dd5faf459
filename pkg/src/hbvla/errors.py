"""Exception hierarchy shared by the whole package.

CLI exit-code mapping: ConfigurationError and SizeLimitError are usage
problems (exit 2); FormatError and its relatives are input problems
(exit 3); NumericalError covers failed factorizations and non-finite
intermediates (exit 4).
"""


class HbvlaError(Exception):
    """Base class for all package errors."""


class FormatError(HbvlaError):
    """Malformed container file; message names the offending field."""


class TruncationError(FormatError):
    """Declared dimensions do not match the payload length."""


class DimensionError(HbvlaError):
    """Operand shapes are incompatible."""


class DegenerateInputError(HbvlaError):
    """Input too small or too uniform for the requested operation."""


class InconsistencyError(HbvlaError):
    """Internally inconsistent composite value (e.g. mismatched subbands)."""


class PermutationError(HbvlaError):
    """Index sequence is not a valid permutation."""


class ConfigurationError(HbvlaError):
    """Invalid or contradictory configuration."""


class SizeLimitError(ConfigurationError):
    """Problem size exceeds a documented hard limit."""


class NumericalError(HbvlaError):
    """Numerical failure (non-finite values, failed factorization)."""


class SingularHessianError(NumericalError):
    """Hessian not positive definite even after damping."""


class DegeneratePartitionError(ConfigurationError):
    """Saliency partition leaves no non-salient columns to work with."""
