# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import pkg.libs.Variables as var


class RumboostError(Exception):
    """Base class for every error the engine raises on purpose."""

    exitCode = var.exitNumerical


class ConfigError(RumboostError):
    """Bad command line flags, settings or run configuration."""

    exitCode = var.exitConfig


class SpecError(ConfigError):
    """A model specification that cannot be parsed or validated."""

    def __init__(self, message, location=None):
        self.location = location

        if location:
            message = "{} (at {})".format(message, location)

        super().__init__(message)


class DataError(RumboostError):
    exitCode = var.exitData


class SchemaError(DataError):
    pass


class ParseError(DataError):
    """A cell that cannot be read. Row numbers are 1-based data rows."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column

        if row is not None or column is not None:
            message = "{} (row {}, column {})".format(message, row, column)

        super().__init__(message)


class ValidationError(DataError):
    pass


class ModelFileError(DataError):
    def __init__(self, message, offset=None):
        self.offset = offset

        if offset is not None:
            message = "{} (byte offset {})".format(message, offset)

        super().__init__(message)


class NumericalError(RumboostError):
    exitCode = var.exitNumerical
