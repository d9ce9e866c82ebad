"""Shared exception types; the CLI maps these to its exit codes."""


class ConfigError(ValueError):
    """Invalid configuration or user input (CLI exit code 2)."""


class GuardError(RuntimeError):
    """A resource guard refused the requested computation (CLI exit code 3)."""
