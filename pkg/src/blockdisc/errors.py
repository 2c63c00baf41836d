"""Exception types shared across the package.

Every error carries a machine-readable ``code`` so that ledgers and the CLI
can report failures without parsing messages.
"""

from __future__ import annotations


class BlockDiscError(Exception):
    """Base class for all package errors."""

    code = "ERROR"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"{self.code}: {message}" if message else self.code)


class InputError(BlockDiscError):
    """Unreadable stream or bad schema; fatal for a parse call."""

    code = "IO_ERROR"


class SchemaError(InputError):
    code = "SCHEMA_ERROR"


class AddressError(BlockDiscError):
    code = "UNPARSEABLE"


class CoordinateError(BlockDiscError, ValueError):
    code = "INVALID_COORDINATE"


class GeocoderUnavailable(BlockDiscError):
    """The geocoder could not answer. Not the same thing as a rejected geocode."""

    code = "GEOCODER_UNAVAILABLE"


class PipelineError(BlockDiscError):
    code = "PIPELINE_ERROR"


class EstimationError(BlockDiscError):
    code = "ESTIMATION_ERROR"


class DiagnosticsError(BlockDiscError):
    code = "DIAGNOSTICS_ERROR"


class ParamsError(BlockDiscError, ValueError):
    code = "BAD_PARAMS"
