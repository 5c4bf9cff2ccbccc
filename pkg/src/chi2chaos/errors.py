"""Exception types shared across the package."""


class ResourceGuardError(RuntimeError):
    """Raised when an operation would exceed the configured tensor-size guards."""


class ConsistencyError(RuntimeError):
    """Two redundant internal computations of the same quantity disagreed.

    This signals an algebra bug in the library, not a user error.
    """


class NumericalError(RuntimeError):
    """A numerical routine failed to converge; the message carries diagnostics."""


class ConfigError(ValueError):
    """Invalid configuration or domain-type input; the message names the field."""
