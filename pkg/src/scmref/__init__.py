"""Compact-model design toolkit for nA-range self-cascode current references."""

from .errors import ConfigError, ConvergenceError, DomainError, InputError, ScmrefError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ConvergenceError", "DomainError", "InputError", "ScmrefError", "__version__"]
