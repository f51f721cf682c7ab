"""Exception types shared across the package.

Validation-type errors derive from ValueError so that callers (and the CLI,
which maps them to exit code 1) can catch input problems uniformly;
numerical/resource failures derive from RuntimeError (CLI exit code 2).
"""


class DomainError(ValueError):
    """An argument is outside the mathematical domain of the operation."""


class UnsupportedDimension(DomainError):
    """Spatial dimension outside {1, 2, 3}; the field is not defined there."""

    def __init__(self, d):
        super().__init__(
            f"d={d}: the white-noise field is well-defined only for d in {{1, 2, 3}}"
        )


class ConfigError(ValueError):
    """Inconsistent or malformed run configuration."""


class NumericalFailure(RuntimeError):
    """A numerical routine could not reach its accuracy/stability target."""


class ResourceLimit(RuntimeError):
    """A requested tolerance is unreachable within the memory/mode budget."""
