"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
SizeError exits 3, InputError and subclasses exit 4.
"""


class StochKtspError(Exception):
    """Base class for all package errors."""


class InputError(StochKtspError):
    """Invalid instance, distribution, tour, or file content."""


class DegenerateMetricError(InputError):
    """All off-diagonal distances are zero; rescaling is impossible."""


class InfeasibleError(InputError):
    """The requested target can never be met on this instance."""


class SizeError(StochKtspError):
    """A size/state-space guard was exceeded; the message names the limit."""
