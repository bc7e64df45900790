"""Exception hierarchy shared across the package.

Validation failures map to CLI exit code 2, numeric failures to exit code 3.
"""


class CellnasError(Exception):
    pass


class ValidationError(CellnasError):
    """Malformed input: files, graphs, configs, or mismatched dimensions."""


class NumericError(CellnasError):
    """Non-finite values encountered during training or scoring."""
