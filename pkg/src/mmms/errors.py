"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new error types should
subclass one of the three top-level categories.
"""


class MmmsError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(MmmsError):
    """Invalid configuration or CLI arguments."""

    exit_code = 2


class DatasetError(MmmsError):
    """Dataset layout, manifest, or raster problems."""

    exit_code = 3


class PredictorError(MmmsError):
    """Any failure inside a predictor backend."""

    exit_code = 4


class RemoteProtocolError(PredictorError):
    """The remote child sent a payload that violates the wire protocol."""

    def __init__(self, message: str, payload: str = ""):
        super().__init__(message)
        self.payload = payload


class RemoteTimeoutError(PredictorError):
    """The remote child did not answer within the per-call deadline."""


class RemoteExitError(PredictorError):
    """The remote child exited or closed its pipes mid-session."""
