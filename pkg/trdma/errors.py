"""
Exception types raised by the simulator.
Every error carries the category and exit status the command line reports.
"""


class TrdmaError(Exception):
    category = "internal"
    exit_code = 1


class ConfigError(TrdmaError, ValueError):
    """Invalid configuration value or operation parameter."""
    category = "config"
    exit_code = 2


class InputError(TrdmaError):
    """Input file missing or unreadable."""
    category = "input"
    exit_code = 3


class FormatError(InputError):
    """Malformed CIR or precoder file. The message names the section that failed."""

    def __init__(self, path, section, detail=""):
        self.path = path
        self.section = section
        msg = "%s: malformed or missing section '%s'" % (path, section)
        if detail:
            msg += " (%s)" % detail
        super(FormatError, self).__init__(msg)


class DimensionMismatchError(TrdmaError, ValueError):
    category = "dimension"
    exit_code = 4


class NumericError(TrdmaError, ArithmeticError):
    """Zero-energy user bank or precoder, empty sequence where a value is required."""
    category = "numeric"
    exit_code = 5
