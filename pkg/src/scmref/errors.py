class ScmrefError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ScmrefError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class ConvergenceError(ScmrefError, RuntimeError):
    """An iterative solver or search did not converge."""


class InputError(ScmrefError, ValueError):
    """Malformed or insufficient input data (series, codes, records)."""


class ConfigError(InputError):
    """Invalid run configuration; the message names the offending line when known."""
