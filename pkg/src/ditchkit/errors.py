"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the command line front end:

* 2  configuration could not be parsed or validated
* 3  numerical failure (non-convergence, NaN, singular system)
* 4  file I/O or format errors
* 5  evaluation requested on an incomplete model/seed/case grid
"""


class DitchkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(DitchkitError):
    """Invalid or inconsistent configuration input."""

    exit_code = 2


class GeometryError(ConfigError):
    """Invalid hull geometry (negative radius, non-monotone tables, ...)."""


class NumericError(DitchkitError):
    """Numerical failure inside a solver or a model."""

    exit_code = 3


class StepError(NumericError):
    """Time step failed: the acceleration fixed point did not converge.

    When raised out of a full simulation run, ``history`` carries the
    load history recorded up to the failing step.
    """

    def __init__(self, message, t=None, residual=None, history=None):
        super().__init__(message)
        self.t = t
        self.residual = residual
        self.history = history


class RolloutError(NumericError):
    """Autoregressive rollout produced a non-finite frame."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(DitchkitError):
    """Binary file violates its format contract."""

    exit_code = 4


class MagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    """File carries an unsupported format version."""


class TruncatedError(FormatError):
    """File ends before the payload announced in its header."""


class ChecksumError(FormatError):
    """Payload checksum mismatch."""


class IncompleteGridError(DitchkitError):
    """Evaluation requires every (model, seed, case) cell to be present."""

    exit_code = 5

    def __init__(self, message, missing=None):
        super().__init__(message)
        self.missing = tuple(missing) if missing else ()
