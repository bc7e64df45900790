"""Exception hierarchy: one base, one class per failure family."""


class OpembedError(Exception):
    """Base for all errors raised by this package."""


class ValidationError(OpembedError):
    """Malformed inputs: descriptions, length classes, table files, flags."""


class ModelError(OpembedError):
    """The sentence-encoder model cannot be resolved or run."""
